#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mrisr/linalg.hpp"

namespace mrisr {

/// Right-hand side written into a preallocated vector of the state size.
using Rhs = std::function<void(double t, const Vec& y, Vec& out)>;
using JacobianFn = std::function<Jacobian(double t, const Vec& y)>;

struct Bandwidths {
  std::size_t kl = 0;
  std::size_t ku = 0;
};

/// y' = f_fast + f_explicit + f_implicit. Callables must tolerate concurrent
/// invocation if runs of the same instance are executed in parallel.
struct SplitIVP {
  std::string name;
  std::size_t dim = 0;
  double t0 = 0.0;
  Vec y0;
  Rhs f_fast;
  Rhs f_explicit;
  Rhs f_implicit;
  JacobianFn jac_implicit;            // empty: finite differences
  std::optional<Bandwidths> band;     // declared structure of the f_implicit Jacobian
  double typical_scale = 1.0;         // lower bound for finite-difference increments
};

inline Vec eval(const Rhs& f, double t, const Vec& y) {
  Vec out(y.size());
  f(t, y, out);
  return out;
}

/// Forward-difference Jacobian of f_implicit with increments
/// sqrt(eps) * max(|y_j|, typical_scale). Banded problems use column
/// grouping so the cost is kl + ku + 1 evaluations.
inline Jacobian fd_jacobian(const SplitIVP& p, double t, const Vec& y) {
  const double sq = std::sqrt(std::numeric_limits<double>::epsilon());
  const auto n = static_cast<std::size_t>(y.size());
  Vec f0(y.size()), f1(y.size());
  p.f_implicit(t, y, f0);
  if (!p.band) {
    DenseMatrix J(y.size(), y.size());
    Vec yp = y;
    for (std::size_t j = 0; j < n; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const double h = sq * std::max(std::abs(y[jj]), p.typical_scale);
      yp[jj] = y[jj] + h;
      p.f_implicit(t, yp, f1);
      J.col(jj) = (f1 - f0) / h;
      yp[jj] = y[jj];
    }
    return J;
  }
  const std::size_t kl = p.band->kl, ku = p.band->ku, width = kl + ku + 1;
  BandedMatrix J(n, kl, ku);
  for (std::size_t g = 0; g < width && g < n; ++g) {
    Vec yp = y;
    std::vector<double> hs(n, 0.0);
    for (std::size_t j = g; j < n; j += width) {
      const auto jj = static_cast<Eigen::Index>(j);
      hs[j] = sq * std::max(std::abs(y[jj]), p.typical_scale);
      yp[jj] += hs[j];
    }
    p.f_implicit(t, yp, f1);
    for (std::size_t j = g; j < n; j += width) {
      const std::size_t lo = j > ku ? j - ku : 0;
      const std::size_t hi = std::min(n - 1, j + kl);
      for (std::size_t i = lo; i <= hi; ++i)
        J.at(i, j) = (f1[static_cast<Eigen::Index>(i)] - f0[static_cast<Eigen::Index>(i)]) / hs[j];
    }
  }
  return J;
}

inline Jacobian implicit_jacobian(const SplitIVP& p, double t, const Vec& y) {
  if (p.jac_implicit) return p.jac_implicit(t, y);
  return fd_jacobian(p, t, y);
}

}  // namespace mrisr
