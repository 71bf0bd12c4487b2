#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <vector>

#include "mrisr/errors.hpp"
#include "mrisr/integrator.hpp"

namespace mrisr {

/// H-M controller. The slow and inner step sizes follow
///   H' = safety H eS^(-k1/(p+1)),  h' = safety h eF^(-k2/(q+1)),
/// so M = H/h updates as M' = round(M eS^(-k1/(p+1)) eF^(k2/(q+1))). Each
/// multiplicative factor is clipped to [shrink, growth] and the results are
/// clamped to [Hmin, Hmax] and [Mmin, Mmax]. A fast error above one always
/// raises M by at least one.
struct ControllerState {
  double k1 = 0.42;
  double k2 = 0.44;
  double safety = 0.9;
  double Hmin = 1e-10;
  double Hmax = std::numeric_limits<double>::infinity();
  std::size_t Mmin = 1;
  std::size_t Mmax = 1000000;
  double growth = 5.0;
  double shrink = 0.1;
  int slow_order = 2;
  int fast_order = 2;

  // Initial values and loop limits for integrate_adaptive.
  double H0 = 0.0;  // 0: (tEnd - t0) / 100
  std::size_t M0 = 10;
  /// Multiplier applied to H after a step whose stage solves failed.
  double failure_shrink = 0.25;
  std::size_t max_consecutive_rejects = 40;
  /// Among the last osc_window attempts, at least osc_window/2 rejections.
  std::size_t osc_window = 200;
  long long max_attempts = 5000000;

  void validate() const {
    if (!(safety > 0.0 && safety <= 1.0)) throw PreconditionError("controller: safety must lie in (0, 1]");
    if (!(k1 > 0.0 && k2 > 0.0)) throw PreconditionError("controller: exponents must be positive");
    if (!(Hmin > 0.0 && Hmin <= Hmax)) throw PreconditionError("controller: need 0 < Hmin <= Hmax");
    if (!(Mmin >= 1 && Mmin <= Mmax)) throw PreconditionError("controller: need 1 <= Mmin <= Mmax");
    if (!(shrink > 0.0 && shrink <= 1.0 && growth >= 1.0)) throw PreconditionError("controller: bad growth limits");
    if (slow_order < 1 || fast_order < 1) throw PreconditionError("controller: orders must be positive");
  }
};

/// WRMS-normalized errors, 1.0 meaning exactly at tolerance.
struct ErrorEstimate {
  double slow = 0.0;
  double fast = 0.0;
  bool fast_available = true;
  bool divergent = false;
};

/// WRMS of y1 - yhat with weights 1 / (atol_i + rtol max(|y1_i|, |yhat_i|)).
/// Tolerances carry the TOL scaling, so 1.0 means at tolerance. Returns
/// infinity for non-finite input.
inline double estimate_slow_error(const Vec& y1, const Vec& yhat, const Vec& atol, double rtol) {
  if (y1.size() != yhat.size() || atol.size() != y1.size())
    throw PreconditionError("estimate_slow_error: size mismatch");
  if (!y1.allFinite() || !yhat.allFinite()) return std::numeric_limits<double>::infinity();
  const Vec w = (atol.array() + rtol * y1.array().abs().max(yhat.array().abs())).inverse().matrix();
  return wrms(y1 - yhat, w);
}

struct FastErrorMean {
  double value = 0.0;
  bool available = false;
};

/// Arithmetic mean of all substep estimates of one slow step (every stage
/// and the embedded pass).
inline FastErrorMean accumulate_fast_error(const std::vector<std::vector<double>>& per_stage) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& st : per_stage)
    for (double e : st) {
      sum += e;
      ++n;
    }
  if (n == 0) return {};
  return {sum / static_cast<double>(n), true};
}

inline FastErrorMean accumulate_fast_error(const std::vector<double>& flat) {
  return accumulate_fast_error(std::vector<std::vector<double>>{flat});
}

struct ControllerDecision {
  bool accept = false;
  double H = 0.0;
  std::size_t M = 0;
};

namespace detail {

inline double limited_factor(double eps, double exponent, const ControllerState& st) {
  if (eps <= 0.0) return st.growth;
  const double f = std::pow(eps, exponent);
  if (!std::isfinite(f)) return exponent < 0.0 ? st.shrink : st.growth;
  return std::clamp(f, st.shrink, st.growth);
}

}  // namespace detail

inline ControllerDecision controller_update(const ControllerState& st, const ErrorEstimate& est, double H,
                                            std::size_t M) {
  if (std::isnan(est.slow) || std::isnan(est.fast) || est.slow < 0.0 || est.fast < 0.0)
    throw PreconditionError("controller_update: estimates must be non-negative numbers");
  const double es = st.k1 / static_cast<double>(st.slow_order + 1);
  const double ef = st.k2 / static_cast<double>(st.fast_order + 1);
  ControllerDecision d;
  const bool fast_ok = !est.fast_available || est.fast <= 1.0;
  d.accept = est.slow <= 1.0 && fast_ok && !est.divergent;
  const double hf = std::clamp(st.safety * detail::limited_factor(est.slow, -es, st), st.shrink, st.growth);
  d.H = std::min(H * hf, st.Hmax);
  if (d.H < st.Hmin)
    throw StepSizeError("step size " + std::to_string(d.H) + " fell below Hmin = " + std::to_string(st.Hmin));
  double mf = detail::limited_factor(est.slow, -es, st);
  if (est.fast_available) mf /= detail::limited_factor(est.fast, -ef, st);
  mf = std::clamp(mf, st.shrink, st.growth);
  double m = std::floor(static_cast<double>(M) * mf + 0.5);
  // Rounding may otherwise pin M after a rejection caused by the fast error.
  if (!fast_ok) m = std::max(m, static_cast<double>(M + 1));
  d.M = static_cast<std::size_t>(std::clamp(m, static_cast<double>(st.Mmin), static_cast<double>(st.Mmax)));
  return d;
}

namespace detail {

inline void adaptive_loop(RunRecord& rec, const SplitIVP& p, const MRISRTableau& t, const ButcherTable& inner,
                          double t_end, double tol, ControllerState st, const std::vector<double>& sample_points,
                          double abs_scale) {
  st.validate();
  if (!t.embedding) throw PreconditionError(t.name + " has no embedding");
  if (!inner.has_embedding()) throw PreconditionError(inner.name + " has no embedding");
  if (!(tol > 0.0)) throw PreconditionError("tolerance must be positive");
  if (!(t_end > p.t0)) throw PreconditionError("t_end must exceed t0");
  const MethodCoefficients mc(t);
  const InnerCoefficients ic(inner);
  const double tol_s = 0.5 * tol, tol_f = 0.5 * tol;
  StepOptions opt;
  opt.embedding = true;
  opt.fast_tol = FastTolerance{tol_f, tol_f * abs_scale};
  opt.newton.rtol = std::max(1e-2 * tol_s, 1e-14);
  opt.newton.atol = std::max(1e-2 * tol_s * abs_scale, 1e-16);
  const Vec atol = Vec::Constant(p.y0.size(), tol_s * abs_scale);

  std::vector<double> targets;
  for (double ts : sample_points) {
    if (ts < p.t0 || ts > t_end) throw PreconditionError("sample point outside the integration interval");
    if (ts > p.t0) targets.push_back(ts);
  }
  targets.push_back(t_end);
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());

  rec = RunRecord{};
  rec.method = t.name;
  rec.inner = inner.name;
  rec.problem = p.name;
  rec.times.push_back(p.t0);
  rec.states.push_back(p.y0);
  for (double ts : sample_points)
    if (ts == p.t0) {
      rec.times.push_back(ts);
      rec.states.push_back(p.y0);
    }

  double tn = p.t0;
  Vec y = p.y0;
  double H = st.H0 > 0.0 ? st.H0 : (t_end - p.t0) / 100.0;
  H = std::clamp(H, st.Hmin, st.Hmax);
  std::size_t M = std::clamp(st.M0, st.Mmin, st.Mmax);
  std::size_t next = 0;
  std::size_t consecutive = 0;
  std::deque<bool> window;
  std::size_t window_rejects = 0;
  long long attempts = 0;
  const auto start = std::chrono::steady_clock::now();
  auto finish = [&] {
    rec.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rec.y_final = y;
    rec.t_final = tn;
  };
  auto note = [&](bool accepted) {
    window.push_back(accepted);
    if (!accepted) ++window_rejects;
    if (window.size() > st.osc_window) {
      if (!window.front()) --window_rejects;
      window.pop_front();
    }
    consecutive = accepted ? 0 : consecutive + 1;
    if (consecutive > st.max_consecutive_rejects)
      throw OscillationError(std::to_string(consecutive) + " consecutive rejected steps at t = " + std::to_string(tn));
    if (window.size() == st.osc_window && 2 * window_rejects >= st.osc_window)
      throw OscillationError("accept/reject oscillation: " + std::to_string(window_rejects) + " of the last " +
                             std::to_string(st.osc_window) + " steps rejected near t = " + std::to_string(tn));
    if (++attempts > st.max_attempts) throw OscillationError("step attempt budget exhausted at t = " + std::to_string(tn));
  };

  try {
    while (next < targets.size()) {
      const double target = targets[next];
      const bool hits = tn + H * (1.0 + 1e-10) >= target;
      const double h_used = hits ? target - tn : H;
      StepLogEntry entry{tn, h_used, M, 0.0, 0.0, false};
      ErrorEstimate est;
      bool solved = true;
      StepResult r;
      try {
        r = step(p, mc, ic, y, tn, h_used, M, opt);
        rec.stats += r.stats;
      } catch (const StepFailure&) {
        solved = false;
      }
      if (!solved) {
        rec.log.push_back(entry);
        ++rec.rejected;
        note(false);
        H = h_used * st.failure_shrink;
        if (H < st.Hmin) throw StepSizeError("step size fell below Hmin after a failed stage solve");
        continue;
      }
      est.slow = estimate_slow_error(r.y1, *r.yhat, atol, tol_s);
      const auto fe = accumulate_fast_error(r.fast_errs);
      est.fast = fe.value;
      est.fast_available = fe.available;
      est.divergent = !std::isfinite(est.slow) || !std::isfinite(est.fast) || !r.y1.allFinite();
      if (!std::isfinite(est.slow)) est.slow = std::numeric_limits<double>::max();
      if (!std::isfinite(est.fast)) est.fast = std::numeric_limits<double>::max();
      entry.eps_s = est.slow;
      entry.eps_f = est.fast;
      const auto d = controller_update(st, est, h_used, M);
      entry.accepted = d.accept;
      rec.log.push_back(entry);
      note(d.accept);
      if (d.accept) {
        ++rec.accepted;
        y = std::move(r.y1);
        if (hits) {
          tn = target;
          for (double ts : sample_points)
            if (ts == target) {
              rec.times.push_back(ts);
              rec.states.push_back(y);
            }
          ++next;
        } else {
          tn += h_used;
        }
        // Keep the untruncated step when a truncated one was accepted.
        H = hits ? std::max(d.H, std::min(H, st.Hmax)) : d.H;
      } else {
        ++rec.rejected;
        H = d.H;
      }
      M = d.M;
    }
  } catch (const Error& e) {
    rec.failed = true;
    rec.failure = e.what();
    finish();
    throw;
  }
  finish();
}

}  // namespace detail

/// Adaptive integration to t_end with TOL_S = TOL_F = tol / 2 (relative and
/// absolute alike, scaled by abs_scale for the absolute part). Steps are
/// truncated to land exactly on every sample point and on t_end. A failed
/// stage solve counts as a rejection and multiplies H by failure_shrink.
/// Throws StepSizeError or OscillationError.
inline RunRecord integrate_adaptive(const SplitIVP& p, const MRISRTableau& t, const ButcherTable& inner, double t_end,
                                    double tol, const ControllerState& st, const std::vector<double>& sample_points,
                                    double abs_scale = 1.0) {
  RunRecord rec;
  detail::adaptive_loop(rec, p, t, inner, t_end, tol, st, sample_points, abs_scale);
  return rec;
}

/// As integrate_adaptive, but a failed run comes back as a partial record
/// with `failed` set instead of an exception.
inline RunRecord try_integrate_adaptive(const SplitIVP& p, const MRISRTableau& t, const ButcherTable& inner,
                                        double t_end, double tol, const ControllerState& st,
                                        const std::vector<double>& sample_points, double abs_scale = 1.0) {
  RunRecord rec;
  try {
    detail::adaptive_loop(rec, p, t, inner, t_end, tol, st, sample_points, abs_scale);
  } catch (const Error& e) {
    rec.failed = true;
    rec.failure = e.what();
  }
  return rec;
}

}  // namespace mrisr
