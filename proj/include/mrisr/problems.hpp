#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mrisr/errors.hpp"
#include "mrisr/integrator.hpp"
#include "mrisr/problem.hpp"
#include "mrisr/tableau.hpp"

namespace mrisr {

struct KPRParams {
  double lamF = -10.0;
  double lamS = -1.0;
  double eps = 0.1;
  double alpha = 1.0;
  double beta = 20.0;
  double tEnd = 2.5 * std::numbers::pi;
};

inline std::pair<double, double> kpr_exact(double t, double beta = 20.0) {
  return {std::sqrt(3.0 + std::cos(beta * t)), std::sqrt(2.0 + std::cos(t))};
}

namespace detail {

struct KPRCoupling {
  double l11, l12, l21, l22;
  explicit KPRCoupling(const KPRParams& q)
      : l11(q.lamF),
        l12((1.0 - q.eps) / q.alpha * (q.lamF - q.lamS)),
        l21(-q.alpha * q.eps * (q.lamF - q.lamS)),
        l22(q.lamS) {}
};

inline double kpr_g1(double t, double u, double beta) { return (-3.0 + u * u - std::cos(beta * t)) / (2.0 * u); }
inline double kpr_g2(double t, double v) { return (-2.0 + v * v - std::cos(t)) / (2.0 * v); }

}  // namespace detail

/// Fast: first row of Lambda g minus the beta sin(beta t) forcing; implicit:
/// second row of Lambda g; explicit: the remaining -sin(t)/(2v) forcing.
inline SplitIVP kpr_problem(const KPRParams& q = {}) {
  const detail::KPRCoupling L(q);
  const double beta = q.beta;
  SplitIVP p;
  p.name = "kpr";
  p.dim = 2;
  p.t0 = 0.0;
  p.y0 = Vec(2);
  p.y0 << 2.0, std::sqrt(3.0);
  p.f_fast = [L, beta](double t, const Vec& y, Vec& out) {
    const double g1 = detail::kpr_g1(t, y[0], beta), g2 = detail::kpr_g2(t, y[1]);
    out[0] = L.l11 * g1 + L.l12 * g2 - beta * std::sin(beta * t) / (2.0 * y[0]);
    out[1] = 0.0;
  };
  p.f_explicit = [](double t, const Vec& y, Vec& out) {
    out[0] = 0.0;
    out[1] = -std::sin(t) / (2.0 * y[1]);
  };
  p.f_implicit = [L, beta](double t, const Vec& y, Vec& out) {
    const double g1 = detail::kpr_g1(t, y[0], beta), g2 = detail::kpr_g2(t, y[1]);
    out[0] = 0.0;
    out[1] = L.l21 * g1 + L.l22 * g2;
  };
  p.jac_implicit = [L, beta](double t, const Vec& y) -> Jacobian {
    const double u = y[0], v = y[1];
    const double dg1 = 0.5 + (3.0 + std::cos(beta * t)) / (2.0 * u * u);
    const double dg2 = 0.5 + (2.0 + std::cos(t)) / (2.0 * v * v);
    DenseMatrix J = DenseMatrix::Zero(2, 2);
    J(1, 0) = L.l21 * dg1;
    J(1, 1) = L.l22 * dg2;
    return J;
  };
  return p;
}

/// Unsplit right-hand side, used to check the partition.
inline Vec kpr_monolithic(const KPRParams& q, double t, const Vec& y) {
  const detail::KPRCoupling L(q);
  const double g1 = detail::kpr_g1(t, y[0], q.beta), g2 = detail::kpr_g2(t, y[1]);
  Vec out(2);
  out[0] = L.l11 * g1 + L.l12 * g2 - q.beta * std::sin(q.beta * t) / (2.0 * y[0]);
  out[1] = L.l21 * g1 + L.l22 * g2 - std::sin(t) / (2.0 * y[1]);
  return out;
}

enum class BrusselatorVariant { Fixed, TimeVarying };

struct BrusselatorParams {
  std::size_t N = 201;
  BrusselatorVariant variant = BrusselatorVariant::Fixed;
  double alpha = 1e-2;  // diffusion, all species
  double rho = 1e-3;    // advection, all species
  double r = 1.0;       // reaction scale, all species
  double a = 0.6;
  double b = 2.0;
  double eps = 1e-2;
  double tEnd = 3.0;
  double u0 = 0.6, v0 = 2.0 / 0.6, w0 = 2.0;  // initial offsets

  static BrusselatorParams fixed(std::size_t N) {
    BrusselatorParams q;
    q.N = N;
    return q;
  }
  static BrusselatorParams time_varying(std::size_t N = 101) {
    BrusselatorParams q;
    q.N = N;
    q.variant = BrusselatorVariant::TimeVarying;
    q.a = 1.0;
    q.b = 3.5;
    q.eps = 1e-3;
    q.u0 = 1.2;
    q.v0 = 3.1;
    q.w0 = 3.0;
    return q;
  }
  double alpha_at(double t) const {
    return variant == BrusselatorVariant::Fixed ? alpha : 6e-5 + 5e-5 * std::cos(std::numbers::pi * t);
  }
  double rho_at(double t) const { return variant == BrusselatorVariant::Fixed ? rho : alpha_at(t); }
  double r_at(double t) const {
    return variant == BrusselatorVariant::Fixed ? r : 0.6 + 0.5 * std::cos(4.0 * std::numbers::pi * t);
  }
};

/// Species-major layout [u_0..u_{N-1}, v_0.., w_0..] on x_j = j/(N-1).
/// Boundary values are held fixed: every partition is zero there.
inline SplitIVP brusselator_problem(const BrusselatorParams& q) {
  if (q.N < 3) throw PreconditionError("brusselator needs N >= 3");
  const std::size_t N = q.N;
  const double dx = 1.0 / static_cast<double>(N - 1);
  SplitIVP p;
  p.name = "brusselator";
  p.dim = 3 * N;
  p.t0 = 0.0;
  p.y0 = Vec(static_cast<Eigen::Index>(3 * N));
  for (std::size_t j = 0; j < N; ++j) {
    const double s = 0.1 * std::sin(std::numbers::pi * static_cast<double>(j) * dx);
    p.y0[static_cast<Eigen::Index>(j)] = q.u0 + s;
    p.y0[static_cast<Eigen::Index>(N + j)] = q.v0 + s;
    p.y0[static_cast<Eigen::Index>(2 * N + j)] = q.w0 + s;
  }
  p.f_implicit = [q, N, dx](double t, const Vec& y, Vec& out) {
    const double c = q.alpha_at(t) / (dx * dx);
    for (std::size_t sp = 0; sp < 3; ++sp) {
      const double* ys = y.data() + sp * N;
      double* os = out.data() + sp * N;
      os[0] = 0.0;
      os[N - 1] = 0.0;
      for (std::size_t j = 1; j + 1 < N; ++j) os[j] = c * (ys[j - 1] - 2.0 * ys[j] + ys[j + 1]);
    }
  };
  p.f_explicit = [q, N, dx](double t, const Vec& y, Vec& out) {
    const double c = q.rho_at(t) / (2.0 * dx);
    for (std::size_t sp = 0; sp < 3; ++sp) {
      const double* ys = y.data() + sp * N;
      double* os = out.data() + sp * N;
      os[0] = 0.0;
      os[N - 1] = 0.0;
      for (std::size_t j = 1; j + 1 < N; ++j) os[j] = c * (ys[j + 1] - ys[j - 1]);
    }
  };
  p.f_fast = [q, N](double t, const Vec& y, Vec& out) {
    const double r = q.r_at(t);
    const double* u = y.data();
    const double* v = u + N;
    const double* w = v + N;
    double* ou = out.data();
    double* ov = ou + N;
    double* ow = ov + N;
    for (std::size_t j : {std::size_t{0}, N - 1}) ou[j] = ov[j] = ow[j] = 0.0;
    for (std::size_t j = 1; j + 1 < N; ++j) {
      const double uj = u[j], vj = v[j], wj = w[j];
      ou[j] = r * (q.a - (wj + 1.0) * uj + uj * uj * vj);
      ov[j] = r * (wj * uj - uj * uj * vj);
      ow[j] = r * ((q.b - wj) / q.eps - wj * uj);
    }
  };
  p.jac_implicit = [q, N, dx](double t, const Vec&) -> Jacobian {
    const double c = q.alpha_at(t) / (dx * dx);
    BandedMatrix J(3 * N, 1, 1);
    for (std::size_t sp = 0; sp < 3; ++sp)
      for (std::size_t j = 1; j + 1 < N; ++j) {
        const std::size_t i = sp * N + j;
        J.at(i, i - 1) = c;
        J.at(i, i) = -2.0 * c;
        J.at(i, i + 1) = c;
      }
    return J;
  };
  p.band = Bandwidths{1, 1};
  return p;
}

inline Vec brusselator_monolithic(const BrusselatorParams& q, double t, const Vec& y) {
  const std::size_t N = q.N;
  const double dx = 1.0 / static_cast<double>(N - 1);
  Vec out = Vec::Zero(y.size());
  const double al = q.alpha_at(t), rh = q.rho_at(t), r = q.r_at(t);
  for (std::size_t j = 1; j + 1 < N; ++j) {
    double s[3];
    for (std::size_t sp = 0; sp < 3; ++sp) {
      const auto i = static_cast<Eigen::Index>(sp * N + j);
      s[sp] = al * (y[i - 1] - 2.0 * y[i] + y[i + 1]) / (dx * dx) + rh * (y[i + 1] - y[i - 1]) / (2.0 * dx);
    }
    const auto ju = static_cast<Eigen::Index>(j);
    const double u = y[ju], v = y[ju + static_cast<Eigen::Index>(N)], w = y[ju + static_cast<Eigen::Index>(2 * N)];
    out[ju] = s[0] + r * (q.a - (w + 1.0) * u + u * u * v);
    out[ju + static_cast<Eigen::Index>(N)] = s[1] + r * (w * u - u * u * v);
    out[ju + static_cast<Eigen::Index>(2 * N)] = s[2] + r * ((q.b - w) / q.eps - w * u);
  }
  return out;
}

/// A registered problem with its interval, default sample points and, when
/// available, the exact solution.
struct ProblemSetup {
  std::string id;
  SplitIVP ivp;
  double tEnd = 0.0;
  std::vector<double> samples;
  std::function<Vec(double)> exact;
  std::map<std::string, double> params;
};

inline const std::vector<std::string>& problem_names() {
  static const std::vector<std::string> names{"kpr", "brusselator-201", "brusselator-801", "brusselator-tv-101"};
  return names;
}

/// Ten equally spaced points (t0, tEnd].
inline std::vector<double> equispaced_samples(double t0, double tEnd, std::size_t n = 10) {
  std::vector<double> s;
  for (std::size_t k = 1; k <= n; ++k) s.push_back(t0 + (tEnd - t0) * static_cast<double>(k) / static_cast<double>(n));
  return s;
}

/// Registry lookup with key=value overrides (numeric parameters only).
inline ProblemSetup make_problem(const std::string& id, const std::map<std::string, double>& overrides = {}) {
  auto take = [&](const char* key, double& slot) {
    if (auto it = overrides.find(key); it != overrides.end()) slot = it->second;
  };
  auto check_keys = [&](std::initializer_list<const char*> allowed) {
    for (const auto& [k, v] : overrides) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || k == a;
      if (!ok) throw LookupError("problem " + id + " has no parameter '" + k + "'");
    }
  };
  ProblemSetup s;
  s.id = id;
  if (id == "kpr") {
    check_keys({"lamF", "lamS", "eps", "alpha", "beta", "tEnd"});
    KPRParams q;
    take("lamF", q.lamF);
    take("lamS", q.lamS);
    take("eps", q.eps);
    take("alpha", q.alpha);
    take("beta", q.beta);
    take("tEnd", q.tEnd);
    s.ivp = kpr_problem(q);
    s.tEnd = q.tEnd;
    s.samples = equispaced_samples(0.0, q.tEnd);
    const double beta = q.beta;
    s.exact = [beta](double t) {
      auto [u, v] = kpr_exact(t, beta);
      Vec y(2);
      y << u, v;
      return y;
    };
    s.params = {{"lamF", q.lamF}, {"lamS", q.lamS}, {"eps", q.eps}, {"alpha", q.alpha}, {"beta", q.beta}, {"tEnd", q.tEnd}};
    return s;
  }
  BrusselatorParams q;
  if (id == "brusselator-201") q = BrusselatorParams::fixed(201);
  else if (id == "brusselator-801") q = BrusselatorParams::fixed(801);
  else if (id == "brusselator-tv-101") q = BrusselatorParams::time_varying(101);
  else throw LookupError("unknown problem '" + id + "'");
  check_keys({"N", "alpha", "rho", "r", "a", "b", "eps", "tEnd"});
  double N = static_cast<double>(q.N);
  take("N", N);
  q.N = static_cast<std::size_t>(N);
  take("alpha", q.alpha);
  take("rho", q.rho);
  take("r", q.r);
  take("a", q.a);
  take("b", q.b);
  take("eps", q.eps);
  take("tEnd", q.tEnd);
  if (q.variant == BrusselatorVariant::Fixed && (overrides.count("a") || overrides.count("b"))) {
    q.u0 = q.a;
    q.v0 = q.b / q.a;
    q.w0 = q.b;
  }
  s.ivp = brusselator_problem(q);
  s.ivp.name = id;
  s.tEnd = q.tEnd;
  s.samples = equispaced_samples(0.0, q.tEnd);
  s.params = {{"N", static_cast<double>(q.N)}, {"alpha", q.alpha}, {"rho", q.rho}, {"r", q.r},
              {"a", q.a},   {"b", q.b},       {"eps", q.eps},     {"tEnd", q.tEnd}};
  return s;
}

struct ReferenceResult {
  std::vector<double> times;
  std::vector<Vec> states;
  double H = 0.0;        // finest step used
  double change = 0.0;   // last relative change between successive halvings
  double gate = 0.0;
};

struct ReferenceOptions {
  double gate = 1e-10;
  double H0 = 0.0;       // 0: (tEnd - t0) / 80, a divisor of the ten default samples
  double Hmin = 1e-6;
  std::size_t M = 10;
  NewtonConfig newton{1e-12, 1e-14, 10, true};
};

/// Self-generated reference: IMEX-MRI-SR3(2) with Bogacki-Shampine at
/// H0, H0/2, ... until two successive halvings each change the samples by
/// less than `gate` relative to their magnitude. The finest pair is combined
/// by Richardson extrapolation.
inline ReferenceResult reference_solution(const SplitIVP& p, double tEnd, const std::vector<double>& samples,
                                          const ReferenceOptions& opt = {}) {
  const auto method = load_builtin("imex-mri-sr32");
  const auto inner = load_inner("bogacki-shampine");
  StepOptions so;
  so.newton = opt.newton;
  double H = opt.H0 > 0.0 ? opt.H0 : (tEnd - p.t0) / 80.0;
  auto run = [&](double h) { return integrate_fixed(p, method, inner, tEnd, h, opt.M, samples, so); };
  auto rel_change = [](const RunRecord& a, const RunRecord& b) {
    double worst = 0.0;
    for (std::size_t k = 1; k < a.states.size(); ++k) {
      const double scale = std::max(1.0, b.states[k].cwiseAbs().maxCoeff());
      worst = std::max(worst, (a.states[k] - b.states[k]).cwiseAbs().maxCoeff() / scale);
    }
    return worst;
  };
  // Coarse runs that fail (unstable step sizes) are skipped.
  std::optional<RunRecord> coarse;
  int passes = 0;
  double change = 0.0;
  std::string last_failure;
  while (true) {
    if (H < opt.Hmin)
      throw ReferenceError("reference gate " + std::to_string(opt.gate) + " unmet at H = " + std::to_string(H) +
                           " (last change " + std::to_string(change) + ")" +
                           (last_failure.empty() ? "" : "; " + last_failure));
    RunRecord fine = run(H);
    if (fine.failed) {
      if (coarse) throw ReferenceError("reference run failed at H = " + std::to_string(H) + ": " + fine.failure);
      last_failure = fine.failure;
      H /= 2.0;
      continue;
    }
    if (coarse) {
      change = rel_change(*coarse, fine);
      passes = change < opt.gate ? passes + 1 : 0;
    }
    if (passes >= 2) {
      ReferenceResult r;
      r.times = fine.times;
      for (std::size_t k = 0; k < fine.states.size(); ++k)
        r.states.push_back(fine.states[k] + (fine.states[k] - coarse->states[k]) / 7.0);
      r.H = H;
      r.change = change;
      r.gate = opt.gate;
      return r;
    }
    H /= 2.0;
    coarse = std::move(fine);
  }
}

}  // namespace mrisr
