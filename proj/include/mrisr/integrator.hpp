#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mrisr/butcher.hpp"
#include "mrisr/errors.hpp"
#include "mrisr/linalg.hpp"
#include "mrisr/newton.hpp"
#include "mrisr/problem.hpp"
#include "mrisr/tableau.hpp"

namespace mrisr {

/// Floating-point copy of a tableau, converted once per run.
struct MethodCoefficients {
  std::string name;
  std::size_t s = 0;
  std::size_t n_omega = 0;
  std::vector<double> c;
  std::vector<DenseMatrix> omega;
  DenseMatrix gamma;
  DenseMatrix omega_bar;
  bool has_embedding = false;
  std::vector<std::vector<double>> emb_omega;
  std::vector<double> emb_gamma;
  std::vector<double> emb_omega_bar;

  explicit MethodCoefficients(const MRISRTableau& t) : name(t.name), s(t.stages()), n_omega(t.n_omega()) {
    auto dense = [&](const Matrix<Rational>& m) {
      DenseMatrix d(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
      for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
          d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = to_double(m(i, j));
      return d;
    };
    c = to_double(t.c);
    for (const auto& m : t.omega) omega.push_back(dense(m));
    gamma = dense(t.gamma);
    omega_bar = dense(mrisr::omega_bar(t));
    if (t.embedding) {
      has_embedding = true;
      for (const auto& r : t.embedding->omega) emb_omega.push_back(to_double(r));
      emb_gamma = to_double(t.embedding->gamma);
      emb_omega_bar = to_double(omega_bar_embedding(t));
    }
  }
};

struct InnerCoefficients {
  std::string name;
  std::size_t s = 0;
  DenseMatrix A;
  std::vector<double> b, c;
  std::vector<double> d;  // b - bhat; empty without an embedding
  int order = 0;

  explicit InnerCoefficients(const ButcherTable& t) : name(t.name), s(t.stages()), order(t.order) {
    if (!t.is_explicit()) throw PreconditionError("inner method " + t.name + " is not explicit");
    A = DenseMatrix::Zero(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s));
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = 0; j < i; ++j)
        A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = to_double(t.A(i, j));
    b = to_double(t.b);
    c = to_double(t.c);
    if (t.bhat)
      for (std::size_t k = 0; k < s; ++k) d.push_back(to_double(t.b[k] - (*t.bhat)[k]));
  }
  bool has_embedding() const noexcept { return !d.empty(); }
};

struct StepStats {
  long long fast_f_evals = 0;
  long long slow_e_evals = 0;
  long long slow_i_evals = 0;
  long long implicit_solves = 0;
  long long newton_iters = 0;
  long long linear_solves = 0;
  long long jacobian_evals = 0;

  StepStats& operator+=(const StepStats& o) {
    fast_f_evals += o.fast_f_evals;
    slow_e_evals += o.slow_e_evals;
    slow_i_evals += o.slow_i_evals;
    implicit_solves += o.implicit_solves;
    newton_iters += o.newton_iters;
    linear_solves += o.linear_solves;
    jacobian_evals += o.jacobian_evals;
    return *this;
  }
};

/// Slow stage values and stored tendencies of the current step.
struct StageWorkspace {
  std::vector<Vec> Y;
  std::vector<Vec> fE;
  std::vector<Vec> fI;
};

/// g(theta) = sum_k G_k (theta / span)^k, the stage forcing with the slow
/// tendencies already contracted.
struct PolynomialForcing {
  std::vector<Vec> coeff;
  double inv_span = 1.0;

  void operator()(double theta, Vec& out) const {
    const double tau = theta * inv_span;
    out = coeff.back();
    for (std::size_t k = coeff.size() - 1; k-- > 0;) out = out * tau + coeff[k];
  }
};

namespace detail {

inline PolynomialForcing stage_forcing(const MethodCoefficients& m, std::size_t i, const StageWorkspace& ws, double H) {
  PolynomialForcing g;
  const double ci = m.c[i];
  g.inv_span = 1.0 / (ci * H);
  const auto dim = ws.fE[0].size();
  for (std::size_t k = 0; k < m.n_omega; ++k) {
    Vec acc = Vec::Zero(dim);
    for (std::size_t j = 0; j < i; ++j) {
      const double w = m.omega[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (w != 0.0) acc += (w / ci) * (ws.fE[j] + ws.fI[j]);
    }
    g.coeff.push_back(std::move(acc));
  }
  return g;
}

inline PolynomialForcing embedding_forcing(const MethodCoefficients& m, const StageWorkspace& ws, double H) {
  PolynomialForcing g;
  g.inv_span = 1.0 / H;
  const auto dim = ws.fE[0].size();
  for (std::size_t k = 0; k < m.emb_omega.size(); ++k) {
    Vec acc = Vec::Zero(dim);
    for (std::size_t j = 0; j < m.s; ++j) {
      const double w = m.emb_omega[k][j];
      if (w != 0.0) acc += w * (ws.fE[j] + ws.fI[j]);
    }
    g.coeff.push_back(std::move(acc));
  }
  return g;
}

}  // namespace detail

/// (1/c_i) sum_{j<i} omega_{i,j}(theta / (c_i H)) (fE_j + fI_j), 0-based i.
inline Vec forcing_eval(const MethodCoefficients& m, std::size_t i, const StageWorkspace& ws, double theta, double H) {
  if (i == 0 || i >= m.s) throw std::out_of_range("forcing_eval: stage index out of range");
  if (!(m.c[i] > 0.0)) throw PreconditionError("forcing_eval: c_i must be positive");
  Vec out;
  detail::stage_forcing(m, i, ws, H)(theta, out);
  return out;
}

/// Weights for the embedded inner error estimate; 1.0 means at tolerance.
struct FastTolerance {
  double rtol = 1e-6;
  double atol = 1e-6;
};

struct FastSolveResult {
  Vec v_end;
  std::vector<double> inner_errs;
};

/// Integrates v' = f_fast(tn + theta, v) + forcing(theta) over [0, span] with
/// n_sub uniform steps of the inner method. `forcing` is any callable
/// (double theta, Vec& out).
template <class Forcing>
FastSolveResult solve_fast_ivp(const SplitIVP& p, const Forcing& forcing, double tn, double span, const Vec& v0,
                               const InnerCoefficients& inner, std::size_t n_sub, StepStats* stats = nullptr,
                               const FastTolerance* tol = nullptr) {
  if (n_sub < 1) throw PreconditionError("solve_fast_ivp: need at least one substep");
  if (!(span > 0.0)) throw PreconditionError("solve_fast_ivp: span must be positive");
  const auto dim = v0.size();
  const double h = span / static_cast<double>(n_sub);
  const std::size_t sf = inner.s;
  std::vector<Vec> K(sf, Vec(dim));
  Vec V(dim), g(dim);
  FastSolveResult res;
  res.v_end = v0;
  Vec& v = res.v_end;
  const bool want_err = tol != nullptr && inner.has_embedding();
  if (want_err) res.inner_errs.reserve(n_sub);
  for (std::size_t m = 0; m < n_sub; ++m) {
    const double theta0 = static_cast<double>(m) * h;
    for (std::size_t k = 0; k < sf; ++k) {
      V = v;
      for (std::size_t l = 0; l < k; ++l) {
        const double a = inner.A(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
        if (a != 0.0) V += (h * a) * K[l];
      }
      const double theta = theta0 + inner.c[k] * h;
      p.f_fast(tn + theta, V, K[k]);
      forcing(theta, g);
      K[k] += g;
    }
    if (stats) stats->fast_f_evals += static_cast<long long>(sf);
    if (want_err) {
      V.setZero();
      for (std::size_t k = 0; k < sf; ++k)
        if (inner.d[k] != 0.0) V += (h * inner.d[k]) * K[k];
    }
    for (std::size_t k = 0; k < sf; ++k)
      if (inner.b[k] != 0.0) v += (h * inner.b[k]) * K[k];
    if (!v.allFinite())
      throw FastDivergenceError("non-finite fast state after substep " + std::to_string(m + 1) + " of " +
                                std::to_string(n_sub));
    if (want_err) res.inner_errs.push_back(wrms(V, error_weights(v, tol->rtol, tol->atol)));
  }
  return res;
}

struct ImplicitSolveResult {
  Vec Y;
  int iters = 0;
};

/// Y = base + H gamma_ii f_implicit(t_stage, Y); base already holds the
/// fast-solve result plus the explicit part of the gamma sum.
inline ImplicitSolveResult implicit_stage_solve(const SplitIVP& p, const Vec& base, double gamma_ii, double t_stage,
                                                double H, const Vec& guess, const NewtonConfig& cfg,
                                                StepStats* stats = nullptr) {
  if (gamma_ii == 0.0) return {base, 0};
  const double hg = H * gamma_ii;
  Vec fy(base.size());
  auto residual = [&](const Vec& Y) -> Vec {
    p.f_implicit(t_stage, Y, fy);
    if (stats) ++stats->slow_i_evals;
    return Y - base - hg * fy;
  };
  auto jacobian = [&](const Vec& Y) -> Jacobian {
    if (stats) ++stats->jacobian_evals;
    return scale_shift(implicit_jacobian(p, t_stage, Y), -hg, 1.0);
  };
  auto r = newton_solve(residual, jacobian, guess, cfg);
  if (stats) {
    ++stats->implicit_solves;
    stats->newton_iters += r.iters;
    stats->linear_solves += r.linear_solves;
  }
  return {std::move(r.root), r.iters};
}

struct StepOptions {
  NewtonConfig newton;
  bool embedding = true;
  /// Inner embedded error estimates are produced only when set.
  std::optional<FastTolerance> fast_tol;
};

struct StepResult {
  Vec y1;
  std::optional<Vec> yhat;
  StepStats stats;
  std::vector<double> fast_errs;
};

inline std::size_t substeps_for(double ci, std::size_t M) {
  const double n = std::ceil(ci * static_cast<double>(M) - 1e-12);
  return n < 1.0 ? 1 : static_cast<std::size_t>(n);
}

/// One slow step from (tn, yn). Stage i (0-based, i >= 1) solves its fast
/// IVP with max(1, ceil(c_i M)) substeps; the embedded pass uses M.
inline StepResult step(const SplitIVP& p, const MethodCoefficients& m, const InnerCoefficients& inner, const Vec& yn,
                       double tn, double H, std::size_t M, const StepOptions& opt = {}) {
  if (!(H > 0.0)) throw PreconditionError("step: H must be positive");
  if (M < 1) throw PreconditionError("step: M must be at least 1");
  const std::size_t s = m.s;
  const auto dim = yn.size();
  StepResult res;
  StageWorkspace ws;
  ws.Y.resize(s);
  ws.fE.assign(s, Vec(dim));
  ws.fI.assign(s, Vec(dim));
  const FastTolerance* ftol = opt.fast_tol ? &*opt.fast_tol : nullptr;

  const bool do_emb = opt.embedding && m.has_embedding;
  auto needs_tendency = [&](std::size_t j) {
    if (j + 1 < s) return true;
    if (!do_emb) return false;
    for (const auto& r : m.emb_omega)
      if (r[j] != 0.0) return true;
    return m.emb_gamma[j] != 0.0;
  };
  auto tendencies = [&](std::size_t j, double t) {
    p.f_explicit(t, ws.Y[j], ws.fE[j]);
    p.f_implicit(t, ws.Y[j], ws.fI[j]);
    res.stats.slow_e_evals++;
    res.stats.slow_i_evals++;
  };

  ws.Y[0] = yn;
  tendencies(0, tn);
  for (std::size_t i = 1; i < s; ++i) {
    const double ci = m.c[i];
    const double ti = tn + ci * H;
    try {
      Vec v;
      if (ci > 0.0) {
        const auto g = detail::stage_forcing(m, i, ws, H);
        auto fr = solve_fast_ivp(p, g, tn, ci * H, yn, inner, substeps_for(ci, M), &res.stats, ftol);
        v = std::move(fr.v_end);
        res.fast_errs.insert(res.fast_errs.end(), fr.inner_errs.begin(), fr.inner_errs.end());
      } else if (ci == 0.0) {
        // Limit c_i -> 0: the fast IVP collapses to the integral of its forcing.
        v = yn;
        for (std::size_t j = 0; j < i; ++j) {
          const double w = m.omega_bar(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
          if (w != 0.0) v += (H * w) * (ws.fE[j] + ws.fI[j]);
        }
      } else {
        throw PreconditionError("negative abscissa c_" + std::to_string(i));
      }
      Vec base = std::move(v);
      for (std::size_t j = 0; j < i; ++j) {
        const double gij = m.gamma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (gij != 0.0) base += (H * gij) * ws.fI[j];
      }
      const double gii = m.gamma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
      ws.Y[i] = implicit_stage_solve(p, base, gii, ti, H, base, opt.newton, &res.stats).Y;
      if (needs_tendency(i)) tendencies(i, ti);
    } catch (const StepFailure&) {
      throw;
    } catch (const Error& e) {
      throw StepFailure(i, e.what());
    }
  }
  res.y1 = ws.Y[s - 1];

  if (do_emb) {
    try {
      const auto g = detail::embedding_forcing(m, ws, H);
      auto fr = solve_fast_ivp(p, g, tn, H, yn, inner, std::max<std::size_t>(1, M), &res.stats, ftol);
      res.fast_errs.insert(res.fast_errs.end(), fr.inner_errs.begin(), fr.inner_errs.end());
      Vec base = std::move(fr.v_end);
      for (std::size_t j = 0; j + 1 < s; ++j)
        if (m.emb_gamma[j] != 0.0) base += (H * m.emb_gamma[j]) * ws.fI[j];
      const double gs = m.emb_gamma[s - 1];
      res.yhat = implicit_stage_solve(p, base, gs, tn + H, H, base, opt.newton, &res.stats).Y;
    } catch (const Error& e) {
      throw StepFailure(s, e.what());
    }
  }
  return res;
}

struct StepLogEntry {
  double t = 0.0;
  double H = 0.0;
  std::size_t M = 0;
  double eps_s = 0.0;
  double eps_f = 0.0;
  bool accepted = false;
};

/// Instrumented result of one integration. Row 0 of `times`/`states` is the
/// initial state; the remaining rows are the requested sample points.
struct RunRecord {
  std::string method;
  std::string inner;
  std::string problem;
  std::vector<double> times;
  std::vector<Vec> states;
  Vec y_final;
  double t_final = 0.0;
  StepStats stats;
  long long accepted = 0;
  long long rejected = 0;
  bool failed = false;
  std::string failure;
  double runtime_s = 0.0;
  std::vector<StepLogEntry> log;
};

namespace detail {

/// Index n with t0 + n H == t up to a relative 1e-9 slack; throws otherwise.
inline long long step_index(double t, double t0, double H, const char* what) {
  const double q = (t - t0) / H;
  const double n = std::round(q);
  if (std::abs(q - n) > 1e-9 * std::max(1.0, std::abs(q)))
    throw PreconditionError(std::string(what) + " " + std::to_string(t) + " is not a multiple of H from t0");
  return static_cast<long long>(n);
}

}  // namespace detail

/// Fixed steps of size H from p.t0 to t_end; every sample point must fall on
/// a step boundary. The embedding pass is skipped.
inline RunRecord integrate_fixed(const SplitIVP& p, const MRISRTableau& t, const ButcherTable& inner, double t_end,
                                 double H, std::size_t M, const std::vector<double>& sample_points,
                                 StepOptions opt = {}) {
  opt.embedding = false;
  opt.fast_tol.reset();
  const MethodCoefficients mc(t);
  const InnerCoefficients ic(inner);
  RunRecord rec;
  rec.method = t.name;
  rec.inner = inner.name;
  rec.problem = p.name;
  const long long n_steps = t_end == p.t0 ? 0 : detail::step_index(t_end, p.t0, H, "t_end");
  std::vector<std::pair<long long, double>> wanted;
  for (double ts : sample_points) {
    const long long k = detail::step_index(ts, p.t0, H, "sample point");
    if (k < 0 || k > n_steps) throw PreconditionError("sample point outside the integration interval");
    wanted.emplace_back(k, ts);
  }
  std::sort(wanted.begin(), wanted.end());
  rec.times.push_back(p.t0);
  rec.states.push_back(p.y0);
  std::size_t next = 0;
  auto record = [&](long long n, const Vec& y) {
    while (next < wanted.size() && wanted[next].first == n) {
      rec.times.push_back(wanted[next].second);
      rec.states.push_back(y);
      ++next;
    }
  };
  Vec y = p.y0;
  record(0, y);
  const auto start = std::chrono::steady_clock::now();
  for (long long n = 0; n < n_steps; ++n) {
    const double tn = p.t0 + static_cast<double>(n) * H;
    try {
      auto r = step(p, mc, ic, y, tn, H, M, opt);
      rec.stats += r.stats;
      y = std::move(r.y1);
      ++rec.accepted;
    } catch (const Error& e) {
      rec.failed = true;
      rec.failure = "step " + std::to_string(n) + " at t = " + std::to_string(tn) + ": " + e.what();
      break;
    }
    record(n + 1, y);
  }
  rec.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  rec.y_final = y;
  rec.t_final = p.t0 + static_cast<double>(rec.accepted) * H;
  return rec;
}

}  // namespace mrisr
