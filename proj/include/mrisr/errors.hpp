#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mrisr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed fraction strings or tableau files.
class FormatError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

class DegenerateAbscissaeError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class DegenerateEmbeddingError : public Error {
 public:
  using Error::Error;
};

class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

class NewtonFailure : public Error {
 public:
  using Error::Error;
};

class FastDivergenceError : public Error {
 public:
  using Error::Error;
};

/// Raised by a slow step; `stage` is the 0-based stage index that failed,
/// or the stage count when the embedded pass failed.
class StepFailure : public Error {
 public:
  StepFailure(std::size_t stage, const std::string& what)
      : Error("stage " + std::to_string(stage) + ": " + what), stage_(stage) {}
  std::size_t stage() const noexcept { return stage_; }

 private:
  std::size_t stage_;
};

class StepSizeError : public Error {
 public:
  using Error::Error;
};

class OscillationError : public Error {
 public:
  using Error::Error;
};

class ReferenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace mrisr
