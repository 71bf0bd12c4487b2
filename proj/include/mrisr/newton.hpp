#pragma once

#include <cmath>
#include <functional>
#include <optional>

#include "mrisr/errors.hpp"
#include "mrisr/linalg.hpp"

namespace mrisr {

struct NewtonConfig {
  double rtol = 1e-10;
  double atol = 1e-12;
  int max_iter = 10;
  /// Reuse the factorization from the initial guess for every iteration.
  bool modified = true;
};

struct NewtonResult {
  Vec root;
  int iters = 0;
  int linear_solves = 0;
  int jacobian_evals = 0;
};

/// Solves residual(x) = 0. With weights w = 1 / (atol + rtol |x|), an
/// iteration is converged when the WRMS norm of its update is at most one or
/// when the residual at the new iterate is (residual measured in the units of
/// x, as for stage equations x - base - h g(x)).
inline NewtonResult newton_solve(const std::function<Vec(const Vec&)>& residual,
                                 const std::function<Jacobian(const Vec&)>& jacobian, Vec guess,
                                 const NewtonConfig& cfg) {
  NewtonResult res;
  res.root = std::move(guess);
  std::optional<LinearSolver> lu;
  Vec r = residual(res.root);
  double prev = 0.0;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    if (!r.allFinite()) throw NewtonFailure("non-finite residual at iteration " + std::to_string(it));
    if (!lu || !cfg.modified) {
      lu.emplace(jacobian(res.root));
      ++res.jacobian_evals;
    }
    const Vec dx = lu->solve(r);
    ++res.linear_solves;
    res.root -= dx;
    res.iters = it;
    const Vec w = error_weights(res.root, cfg.rtol, cfg.atol);
    const double norm = wrms(dx, w);
    if (!std::isfinite(norm)) throw NewtonFailure("non-finite update at iteration " + std::to_string(it));
    if (norm <= 1.0) return res;
    r = residual(res.root);
    if (r.allFinite() && wrms(r, w) <= 1.0) return res;
    if (it >= 3 && norm > 2.0 * prev && prev > 1.0)
      throw NewtonFailure("diverging iteration (update norm " + std::to_string(norm) + ")");
    prev = norm;
  }
  throw NewtonFailure("no convergence in " + std::to_string(cfg.max_iter) + " iterations");
}

}  // namespace mrisr
