#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "mrisr/errors.hpp"

namespace mrisr {

using Vec = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;

/// Square banded matrix with kl sub- and ku super-diagonals. Storage keeps kl
/// extra super-diagonals so that an in-place LU with row pivoting fits.
class BandedMatrix {
 public:
  BandedMatrix() = default;
  BandedMatrix(std::size_t n, std::size_t kl, std::size_t ku)
      : n_(n), kl_(kl), ku_(ku), width_(2 * kl + ku + 1), data_(n * width_, 0.0) {}

  std::size_t size() const noexcept { return n_; }
  std::size_t kl() const noexcept { return kl_; }
  std::size_t ku() const noexcept { return ku_; }

  bool in_band(std::size_t i, std::size_t j) const noexcept {
    return j + kl_ >= i && j <= i + ku_;
  }

  double operator()(std::size_t i, std::size_t j) const {
    if (!in_band(i, j)) return 0.0;
    return data_[slot(i, j)];
  }

  double& at(std::size_t i, std::size_t j) {
    if (!in_band(i, j))
      throw std::out_of_range("banded entry (" + std::to_string(i) + "," + std::to_string(j) + ") outside band");
    return data_[slot(i, j)];
  }

  DenseMatrix to_dense() const {
    DenseMatrix d = DenseMatrix::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = lo(i); j <= hi(i); ++j) d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*this)(i, j);
    return d;
  }

  Vec operator*(const Vec& x) const {
    Vec y = Vec::Zero(static_cast<Eigen::Index>(n_));
    for (std::size_t i = 0; i < n_; ++i) {
      double acc = 0.0;
      for (std::size_t j = lo(i); j <= hi(i); ++j) acc += (*this)(i, j) * x[static_cast<Eigen::Index>(j)];
      y[static_cast<Eigen::Index>(i)] = acc;
    }
    return y;
  }

  /// this = alpha * this + beta * I
  void scale_shift(double alpha, double beta) {
    for (auto& v : data_) v *= alpha;
    for (std::size_t i = 0; i < n_; ++i) data_[slot(i, i)] += beta;
  }

 private:
  friend class BandedLU;
  std::size_t slot(std::size_t i, std::size_t j) const noexcept { return i * width_ + (j + kl_ - i); }
  std::size_t lo(std::size_t i) const noexcept { return i > kl_ ? i - kl_ : 0; }
  std::size_t hi(std::size_t i) const noexcept { return std::min(n_ - 1, i + ku_); }

  std::size_t n_ = 0, kl_ = 0, ku_ = 0, width_ = 1;
  std::vector<double> data_;
};

/// LU factorization with partial pivoting restricted to the band; fill-in
/// grows the upper bandwidth to kl + ku. Cost O(n kl (kl + ku)).
class BandedLU {
 public:
  explicit BandedLU(BandedMatrix a) : a_(std::move(a)), piv_(a_.n_) {
    const std::size_t n = a_.n_, kl = a_.kl_, kuf = a_.kl_ + a_.ku_;
    // Entries in the fill region start out zero; reading them through
    // operator() would mask them, so work on raw slots.
    auto ref = [&](std::size_t i, std::size_t j) -> double& { return a_.data_[a_.slot(i, j)]; };
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t last = std::min(n - 1, k + kl);
      std::size_t p = k;
      double best = std::abs(ref(k, k));
      for (std::size_t i = k + 1; i <= last; ++i)
        if (std::abs(ref(i, k)) > best) {
          best = std::abs(ref(i, k));
          p = i;
        }
      if (!(best > 0.0) || !std::isfinite(best))
        throw SingularMatrixError("banded LU: zero pivot in column " + std::to_string(k));
      piv_[k] = p;
      const std::size_t jmax = std::min(n - 1, k + kuf);
      if (p != k)
        for (std::size_t j = k; j <= jmax; ++j) std::swap(ref(k, j), ref(p, j));
      const double pivot = ref(k, k);
      for (std::size_t i = k + 1; i <= last; ++i) {
        double& l = ref(i, k);
        if (l == 0.0) continue;
        l /= pivot;
        for (std::size_t j = k + 1; j <= jmax; ++j) ref(i, j) -= l * ref(k, j);
      }
    }
  }

  Vec solve(Vec b) const {
    const std::size_t n = a_.n_, kl = a_.kl_, kuf = a_.kl_ + a_.ku_;
    auto val = [&](std::size_t i, std::size_t j) { return a_.data_[a_.slot(i, j)]; };
    for (std::size_t k = 0; k < n; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      if (piv_[k] != k) std::swap(b[kk], b[static_cast<Eigen::Index>(piv_[k])]);
      const std::size_t last = std::min(n - 1, k + kl);
      for (std::size_t i = k + 1; i <= last; ++i) b[static_cast<Eigen::Index>(i)] -= val(i, k) * b[kk];
    }
    for (std::size_t i = n; i-- > 0;) {
      double acc = b[static_cast<Eigen::Index>(i)];
      const std::size_t jmax = std::min(n - 1, i + kuf);
      for (std::size_t j = i + 1; j <= jmax; ++j) acc -= val(i, j) * b[static_cast<Eigen::Index>(j)];
      b[static_cast<Eigen::Index>(i)] = acc / val(i, i);
    }
    return b;
  }

 private:
  BandedMatrix a_;
  std::vector<std::size_t> piv_;
};

class DenseLU {
 public:
  explicit DenseLU(const DenseMatrix& a) : lu_(a) {
    const auto& m = lu_.matrixLU();
    for (Eigen::Index k = 0; k < m.rows(); ++k)
      if (!(std::abs(m(k, k)) > 0.0) || !std::isfinite(m(k, k)))
        throw SingularMatrixError("dense LU: zero pivot in column " + std::to_string(k));
  }
  Vec solve(const Vec& b) const { return lu_.solve(b); }

 private:
  Eigen::PartialPivLU<DenseMatrix> lu_;
};

using Jacobian = std::variant<DenseMatrix, BandedMatrix>;

inline std::size_t jacobian_size(const Jacobian& j) {
  return std::visit(
      [](const auto& m) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, DenseMatrix>) return static_cast<std::size_t>(m.rows());
        else return m.size();
      },
      j);
}

/// alpha * J + beta * I in the same storage format.
inline Jacobian scale_shift(Jacobian j, double alpha, double beta) {
  if (auto* d = std::get_if<DenseMatrix>(&j)) {
    *d *= alpha;
    d->diagonal().array() += beta;
  } else {
    std::get<BandedMatrix>(j).scale_shift(alpha, beta);
  }
  return j;
}

/// Factored dense or banded matrix.
class LinearSolver {
 public:
  explicit LinearSolver(const Jacobian& a) {
    if (const auto* d = std::get_if<DenseMatrix>(&a)) {
      if (d->rows() != d->cols()) throw PreconditionError("linear_solve: matrix is not square");
      lu_ = DenseLU(*d);
    } else {
      lu_ = BandedLU(std::get<BandedMatrix>(a));
    }
  }
  Vec solve(const Vec& b) const {
    return std::visit([&](const auto& f) { return f.solve(b); }, lu_);
  }

 private:
  std::variant<DenseLU, BandedLU> lu_{std::in_place_type<BandedLU>, BandedMatrix(0, 0, 0)};
};

inline Vec linear_solve(const Jacobian& a, const Vec& rhs) {
  if (jacobian_size(a) != static_cast<std::size_t>(rhs.size()))
    throw PreconditionError("linear_solve: size mismatch");
  return LinearSolver(a).solve(rhs);
}

/// sqrt(mean((v_i w_i)^2)).
inline double wrms(const Vec& v, const Vec& w) {
  if (v.size() == 0) return 0.0;
  return std::sqrt((v.array() * w.array()).square().mean());
}

/// Weights 1 / (atol + rtol |y|).
inline Vec error_weights(const Vec& y, double rtol, double atol) {
  return (atol + rtol * y.array().abs()).inverse().matrix();
}

}  // namespace mrisr
