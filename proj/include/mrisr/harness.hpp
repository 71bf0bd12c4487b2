#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrisr/adaptivity.hpp"
#include "mrisr/butcher.hpp"
#include "mrisr/errors.hpp"
#include "mrisr/integrator.hpp"
#include "mrisr/problems.hpp"
#include "mrisr/stability.hpp"
#include "mrisr/tableau.hpp"
#include "mrisr/tableau_io.hpp"
#include "mrisr/theory.hpp"

namespace mrisr {

enum class ExperimentKind { Verify, Converge, Efficiency, Stability, Adaptive };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Verify: return "verify";
    case ExperimentKind::Converge: return "converge";
    case ExperimentKind::Efficiency: return "efficiency";
    case ExperimentKind::Stability: return "stability";
    case ExperimentKind::Adaptive: return "adaptive";
  }
  return "unknown";
}

inline ExperimentKind parse_experiment_kind(const std::string& s) {
  for (auto k : {ExperimentKind::Verify, ExperimentKind::Converge, ExperimentKind::Efficiency, ExperimentKind::Stability,
                 ExperimentKind::Adaptive})
    if (to_string(k) == s) return k;
  throw LookupError("unknown experiment '" + s + "'");
}

inline ScanKind parse_scan_kind(const std::string& s) {
  for (auto k : {ScanKind::Joint, ScanKind::Explicit, ScanKind::Implicit})
    if (to_string(k) == s) return k;
  throw LookupError("unknown scan kind '" + s + "'");
}

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Converge;
  std::vector<std::string> methods;
  std::map<std::string, std::string> inner;  // per method; missing: default_inner_for
  std::string problem = "kpr";
  std::map<std::string, double> overrides;
  /// H_k = H0 / 2^k for k in [kmin, kmax]; H0 = 0 picks pi for kpr and 0.1
  /// otherwise.
  double H0 = 0.0;
  int kmin = 4;
  int kmax = 11;
  std::size_t M = 10;
  std::vector<double> tols{1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  std::size_t n_samples = 10;
  std::string out_dir;
  std::uint64_t seed = 0;
  ControllerState controller;
  double reference_gate = 1e-10;
  /// Floor gate for problems with an exact solution: rows with errors
  /// below 100x this value sit at round-off and are left out of fits.
  double exact_gate = 1e-14;

  ScanKind scan = ScanKind::Explicit;
  SectorSpec fast{45.0, 100.0};
  SectorSpec implicit{45.0, 1e4};
  Window window{-6.0, 0.0, -6.0, 6.0, 121, 241};
  SectorSampling sampling;
  unsigned threads = 0;

  void validate() const {
    if (methods.empty()) throw PreconditionError("no methods selected");
    if (kind == ExperimentKind::Converge || kind == ExperimentKind::Efficiency) {
      if (kmin > kmax) throw PreconditionError("empty H schedule (kmin > kmax)");
      if (M < 1) throw PreconditionError("M must be at least 1");
    }
    if (kind == ExperimentKind::Adaptive && tols.empty()) throw PreconditionError("empty tolerance schedule");
    if (kind == ExperimentKind::Stability && (window.nx < 2 || window.ny < 2))
      throw PreconditionError("scan resolution must be at least 2 per axis");
    if (kind != ExperimentKind::Verify && kind != ExperimentKind::Stability) {
      const auto& names = problem_names();
      if (std::find(names.begin(), names.end(), problem) == names.end())
        throw LookupError("unknown problem '" + problem + "'");
    }
  }

  std::string inner_for(const std::string& method) const {
    if (auto it = inner.find(method); it != inner.end()) return it->second;
    if (auto it = inner.find("*"); it != inner.end()) return it->second;
    return default_inner_for(method);
  }
};

/// One schedule entry of a convergence, efficiency or adaptive series.
struct SeriesRow {
  int k = 0;
  double H = 0.0;
  double tol = 0.0;
  std::size_t M = 0;
  double max_error = 0.0;
  double runtime_s = 0.0;
  long long fast_f_evals = 0;
  long long implicit_solves = 0;
  long long accepted = 0;
  long long rejected = 0;
  bool failed = false;
  bool in_fit = false;
  std::string failure;
};

struct Series {
  ExperimentKind kind = ExperimentKind::Converge;
  std::string method, inner, problem;
  std::vector<SeriesRow> rows;
  std::optional<double> slope;
  double floor = 0.0;
  std::vector<std::vector<StepLogEntry>> logs;  // adaptive runs only, one per row

  bool any_failed() const {
    return std::any_of(rows.begin(), rows.end(), [](const SeriesRow& r) { return r.failed; });
  }
};

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw PreconditionError("slope fit needs at least two points");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) throw PreconditionError("slope fit needs positive data");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw PreconditionError("slope fit needs distinct abscissae");
  return sxy / sxx;
}

/// Marks rows usable for the fit (completed, finite error above `floor`)
/// and fits log(error) against log(H).
inline std::optional<double> fit_series(Series& s, double floor) {
  s.floor = floor;
  std::vector<double> x, y;
  for (auto& r : s.rows) {
    r.in_fit = !r.failed && std::isfinite(r.max_error) && r.max_error > floor;
    if (r.in_fit) {
      x.push_back(r.H);
      y.push_back(r.max_error);
    }
  }
  if (x.size() < 2) return s.slope = std::nullopt;
  return s.slope = loglog_slope(x, y);
}

/// Sampled solution against which errors are measured.
struct Truth {
  std::vector<double> times;
  std::vector<Vec> states;  // row 0: initial state
  double gate = 0.0;
  bool exact = false;
};

inline Truth make_truth(const ProblemSetup& setup, const std::vector<double>& samples, double reference_gate,
                        double exact_gate) {
  Truth tr;
  tr.times.push_back(setup.ivp.t0);
  tr.states.push_back(setup.ivp.y0);
  if (setup.exact) {
    for (double t : samples) {
      tr.times.push_back(t);
      tr.states.push_back(setup.exact(t));
    }
    tr.gate = exact_gate;
    tr.exact = true;
    return tr;
  }
  ReferenceOptions ro;
  ro.gate = reference_gate;
  auto ref = reference_solution(setup.ivp, setup.tEnd, samples, ro);
  tr.times = ref.times;
  tr.states = ref.states;
  tr.gate = reference_gate;
  return tr;
}

/// Max-norm error over the sample rows present in `rec` (row 0 excluded);
/// infinity when a sample was never reached.
inline double max_sample_error(const RunRecord& rec, const Truth& tr) {
  if (rec.states.size() < tr.states.size()) return std::numeric_limits<double>::infinity();
  double err = 0.0;
  for (std::size_t k = 1; k < tr.states.size(); ++k) {
    const double e = (rec.states[k] - tr.states[k]).cwiseAbs().maxCoeff();
    if (!std::isfinite(e)) return std::numeric_limits<double>::infinity();
    err = std::max(err, e);
  }
  return err;
}

inline std::string format_double(double x);

/// A finite run whose error dwarfs the solution itself has blown up.
inline void mark_divergent(SeriesRow& row, const Truth& tr) {
  if (row.failed) return;
  double scale = 0.0;
  for (const auto& y : tr.states) scale = std::max(scale, y.cwiseAbs().maxCoeff());
  if (!std::isfinite(row.max_error)) {
    row.failed = true;
    row.failure = "non-finite solution";
  } else if (row.max_error > 1e3 * (1.0 + scale)) {
    row.failed = true;
    row.failure = "solution blew up (error " + format_double(row.max_error) + ")";
  }
  if (row.failed) row.max_error = std::numeric_limits<double>::infinity();
}

inline double default_H0(const ExperimentConfig& cfg) {
  if (cfg.H0 > 0.0) return cfg.H0;
  return cfg.problem == "kpr" ? std::numbers::pi : 0.1;
}

namespace detail {

inline SeriesRow fixed_row(const ProblemSetup& setup, const MRISRTableau& t, const ButcherTable& in,
                           const std::vector<double>& samples, const Truth& tr, int k, double H, std::size_t M) {
  SeriesRow row;
  row.k = k;
  row.H = H;
  row.M = M;
  const auto rec = integrate_fixed(setup.ivp, t, in, setup.tEnd, H, M, samples);
  row.runtime_s = rec.runtime_s;
  row.fast_f_evals = rec.stats.fast_f_evals;
  row.implicit_solves = rec.stats.implicit_solves;
  row.accepted = rec.accepted;
  row.failed = rec.failed;
  row.failure = rec.failure;
  row.max_error = rec.failed ? std::numeric_limits<double>::infinity() : max_sample_error(rec, tr);
  mark_divergent(row, tr);
  return row;
}

}  // namespace detail

/// Fixed-step series over H_k = H0 / 2^k for one method. Failed rows stay
/// in the series and are left out of the fit.
inline Series run_fixed_series(const ExperimentConfig& cfg, const std::string& method, const ProblemSetup& setup,
                               const std::vector<double>& samples, const Truth& tr) {
  Series s;
  s.kind = cfg.kind;
  const auto t = resolve_method(method);
  const auto in = load_inner(cfg.inner_for(method));
  s.method = t.name;
  s.inner = in.name;
  s.problem = setup.id;
  const double H0 = default_H0(cfg);
  for (int k = cfg.kmin; k <= cfg.kmax; ++k)
    s.rows.push_back(detail::fixed_row(setup, t, in, samples, tr, k, H0 * std::ldexp(1.0, -k), cfg.M));
  fit_series(s, 100.0 * tr.gate);
  return s;
}

namespace detail {

inline std::vector<Series> run_fixed(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto setup = make_problem(cfg.problem, cfg.overrides);
  const auto samples = equispaced_samples(setup.ivp.t0, setup.tEnd, cfg.n_samples);
  const auto tr = make_truth(setup, samples, cfg.reference_gate, cfg.exact_gate);
  std::vector<Series> out;
  for (const auto& m : cfg.methods) out.push_back(run_fixed_series(cfg, m, setup, samples, tr));
  return out;
}

}  // namespace detail

/// Error against the exact (or self-generated reference) solution at the
/// sample points for each H of the schedule.
inline std::vector<Series> run_convergence(ExperimentConfig cfg) {
  cfg.kind = ExperimentKind::Converge;
  return detail::run_fixed(cfg);
}

/// Same rows as run_convergence with runtime and cost counters; the default
/// schedule is H = 0.1 / 2^k, k = 0..10.
inline std::vector<Series> run_efficiency(ExperimentConfig cfg) {
  cfg.kind = ExperimentKind::Efficiency;
  return detail::run_fixed(cfg);
}

/// One adaptive run per tolerance. The slope field holds the fit of
/// log(error) against log(tol).
inline std::vector<Series> run_adaptive(ExperimentConfig cfg) {
  cfg.kind = ExperimentKind::Adaptive;
  cfg.validate();
  const auto setup = make_problem(cfg.problem, cfg.overrides);
  const auto samples = equispaced_samples(setup.ivp.t0, setup.tEnd, cfg.n_samples);
  const auto tr = make_truth(setup, samples, cfg.reference_gate, cfg.exact_gate);
  std::vector<Series> out;
  for (const auto& method : cfg.methods) {
    const auto t = resolve_method(method);
    const auto in = load_inner(cfg.inner_for(method));
    Series s;
    s.kind = cfg.kind;
    s.method = t.name;
    s.inner = in.name;
    s.problem = setup.id;
    ControllerState st = cfg.controller;
    st.slow_order = std::max(1, method_order(t, in.order));
    st.fast_order = in.order;
    for (double tol : cfg.tols) {
      const auto rec = try_integrate_adaptive(setup.ivp, t, in, setup.tEnd, tol, st, samples);
      SeriesRow row;
      row.tol = tol;
      row.H = tol;
      row.runtime_s = rec.runtime_s;
      row.fast_f_evals = rec.stats.fast_f_evals;
      row.implicit_solves = rec.stats.implicit_solves;
      row.accepted = rec.accepted;
      row.rejected = rec.rejected;
      row.failed = rec.failed;
      row.failure = rec.failure;
      row.max_error = rec.failed ? std::numeric_limits<double>::infinity() : max_sample_error(rec, tr);
      mark_divergent(row, tr);
      s.rows.push_back(row);
      s.logs.push_back(rec.log);
    }
    fit_series(s, 100.0 * tr.gate);
    out.push_back(std::move(s));
  }
  return out;
}

/// Region scans for every configured method.
inline std::vector<RegionScan> run_stability(ExperimentConfig cfg) {
  cfg.kind = ExperimentKind::Stability;
  cfg.validate();
  ScanOptions opt;
  opt.sampling = cfg.sampling;
  opt.threads = cfg.threads;
  std::vector<RegionScan> out;
  for (const auto& method : cfg.methods) {
    const MethodCoefficients m(resolve_method(method));
    if (cfg.scan == ScanKind::Joint) out.push_back(scan_joint_region(m, cfg.fast, cfg.implicit, cfg.window, opt));
    else out.push_back(scan_component_region(m, cfg.scan, cfg.fast, cfg.window, opt));
  }
  return out;
}

/// Verification summary of one tableau.
struct VerifyReport {
  std::string method;
  std::string inner;
  std::vector<Finding> findings;
  OrderReport consistency;
  std::vector<OrderReport> base;      // ARK conditions of order 1..4, one report per order
  std::vector<OrderReport> coupling;  // orders 3 and 4
  int base_order = 0;
  int coupling_order = 0;
  int claimed_order = 0;
  int tableau_order = 0;  // min(base, coupling) with internal consistency
  int paired_order = 0;   // method_order with the paired inner method
  std::optional<double> c_stat;
  std::string note;
  double stability_spot_error = 0.0;  // max |R(0,z,0) - base explicit| and |R(0,0,z) - base implicit|

  bool ok() const { return findings.empty() && tableau_order >= claimed_order; }
};

inline int claimed_order(const std::string& name) {
  if (name == "imex-mri-sr21" || name == "merk2") return 2;
  if (name == "imex-mri-sr32" || name == "merk3") return 3;
  if (name == "imex-mri-sr43" || name == "merk4") return 4;
  if (name == "merk5") return 4;  // conditions beyond order four are not available
  return 0;
}

namespace detail {

/// Stability function of a Runge-Kutta pair applied to y' = z y.
inline cplx rk_stability(const DenseMatrix& A, const Eigen::VectorXd& b, cplx z) {
  const auto s = A.rows();
  const Eigen::MatrixXcd M = Eigen::MatrixXcd::Identity(s, s) - z * A.cast<cplx>();
  const Eigen::VectorXcd k = M.partialPivLu().solve(Eigen::VectorXcd::Ones(s));
  return 1.0 + z * b.cast<cplx>().dot(k);
}

}  // namespace detail

inline VerifyReport verify_method(const MRISRTableau& t, const std::string& inner_name, std::uint64_t seed = 0) {
  VerifyReport r;
  r.method = t.name;
  r.inner = inner_name;
  r.findings = validate_structure(t);
  if (!r.findings.empty()) return r;
  r.consistency = check_internal_consistency(t);
  const auto ark = base_ark(t);
  for (int q = 1; q <= 4; ++q) {
    OrderReport rep;
    rep.order = q;
    for (auto& [label, res] : ark_residuals(ark, static_cast<unsigned>(q))) rep.add(label, res);
    if (rep.passed() && r.base_order == q - 1) r.base_order = q;
    r.base.push_back(std::move(rep));
  }
  r.coupling_order = r.consistency.passed() ? 2 : 0;
  for (int p = 3; p <= 4; ++p) {
    auto rep = check_coupling_order(t, p);
    if (rep.passed() && r.coupling_order == p - 1) r.coupling_order = p;
    r.coupling.push_back(std::move(rep));
  }
  const auto in = load_inner(inner_name);
  r.tableau_order = std::min(r.base_order, r.coupling_order);
  r.paired_order = method_order(t, in.order);
  r.claimed_order = claimed_order(t.name);
  if (r.claimed_order == 0) r.claimed_order = r.tableau_order;
  if (t.name == "merk5") r.note = "verified to order 4; order 5 out of scope";
  if (r.paired_order < r.tableau_order) {
    if (!r.note.empty()) r.note += "; ";
    r.note += "order " + std::to_string(r.paired_order) + " with " + inner_name + " (inner order floor " +
              std::to_string(inner_order_floor(r.tableau_order, t.n_omega())) + ")";
  }
  if (t.embedding && r.tableau_order >= 1 && r.tableau_order + 1 <= 4) {
    try {
      r.c_stat = c_statistic(t, r.tableau_order);
    } catch (const Error&) {
    }
  }
  // R(0, z, 0) and R(0, 0, z) against the base explicit and implicit tables.
  const MethodCoefficients m(t);
  const Eigen::Index s = static_cast<Eigen::Index>(m.s);
  const DenseMatrix AE = m.omega_bar, AI = m.omega_bar + m.gamma;
  const Eigen::VectorXd bE = AE.row(s - 1).transpose(), bI = AI.row(s - 1).transpose();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> re(-3.0, 0.0), im(-3.0, 3.0);
  for (int n = 0; n < 20; ++n) {
    const cplx z(re(rng), im(rng));
    r.stability_spot_error = std::max(r.stability_spot_error,
                                      std::abs(stability_value(m, 0.0, z, 0.0) - detail::rk_stability(AE, bE, z)));
    r.stability_spot_error = std::max(r.stability_spot_error,
                                      std::abs(stability_value(m, 0.0, 0.0, z) - detail::rk_stability(AI, bI, z)));
  }
  return r;
}

inline std::vector<VerifyReport> run_verify(const ExperimentConfig& cfg) {
  std::vector<VerifyReport> out;
  for (const auto& method : cfg.methods) out.push_back(verify_method(resolve_method(method), cfg.inner_for(method), cfg.seed));
  return out;
}

// Output.

inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

inline nlohmann::json json_number(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["experiment"] = to_string(c.kind);
  j["methods"] = c.methods;
  j["inner"] = c.inner;
  j["problem"] = c.problem;
  j["overrides"] = c.overrides;
  j["H0"] = default_H0(c);
  j["kmin"] = c.kmin;
  j["kmax"] = c.kmax;
  j["m"] = c.M;
  j["tol"] = c.tols;
  j["samples"] = c.n_samples;
  j["out"] = c.out_dir;
  j["seed"] = c.seed;
  j["reference_gate"] = c.reference_gate;
  j["exact_gate"] = c.exact_gate;
  const auto& k = c.controller;
  j["controller"] = {{"k1", k.k1},         {"k2", k.k2},         {"safety", k.safety}, {"Hmin", k.Hmin},
                     {"Hmax", json_number(k.Hmax)}, {"Mmin", k.Mmin}, {"Mmax", k.Mmax}, {"growth", k.growth},
                     {"shrink", k.shrink}, {"H0", k.H0},         {"M0", k.M0}};
  j["threads"] = c.threads;
  j["scan"] = to_string(c.scan);
  j["fast_sector"] = {{"angle", c.fast.angle}, {"radius", c.fast.radius}};
  j["implicit_sector"] = {{"angle", c.implicit.angle}, {"radius", c.implicit.radius}};
  j["window"] = {{"re_min", c.window.re_min}, {"re_max", c.window.re_max}, {"im_min", c.window.im_min},
                 {"im_max", c.window.im_max}, {"nx", c.window.nx},         {"ny", c.window.ny}};
  j["sampling"] = {{"ray", c.sampling.ray},
                   {"arc", c.sampling.arc},
                   {"lattice_r", c.sampling.lattice_r},
                   {"lattice_a", c.sampling.lattice_a}};
  return j;
}

/// Applies the keys present in `j` on top of `c`; unknown keys are errors.
inline void apply_config_json(ExperimentConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("config: top level must be an object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "experiment") c.kind = parse_experiment_kind(v.get<std::string>());
      else if (key == "methods" || key == "method") c.methods = v.is_array() ? v.get<std::vector<std::string>>() : std::vector<std::string>{v.get<std::string>()};
      else if (key == "inner") {
        if (v.is_string()) c.inner = {{"*", v.get<std::string>()}};
        else c.inner = v.get<std::map<std::string, std::string>>();
      } else if (key == "problem") c.problem = v.get<std::string>();
      else if (key == "overrides") c.overrides = v.get<std::map<std::string, double>>();
      else if (key == "H0") c.H0 = v.get<double>();
      else if (key == "kmin") c.kmin = v.get<int>();
      else if (key == "kmax") c.kmax = v.get<int>();
      else if (key == "m") c.M = v.get<std::size_t>();
      else if (key == "tol") c.tols = v.is_array() ? v.get<std::vector<double>>() : std::vector<double>{v.get<double>()};
      else if (key == "samples") c.n_samples = v.get<std::size_t>();
      else if (key == "out") c.out_dir = v.get<std::string>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "reference_gate") c.reference_gate = v.get<double>();
      else if (key == "exact_gate") c.exact_gate = v.get<double>();
      else if (key == "threads") c.threads = v.get<unsigned>();
      else if (key == "controller") {
        for (const auto& [ck, cv] : v.items()) {
          auto& k = c.controller;
          if (ck == "k1") k.k1 = cv.get<double>();
          else if (ck == "k2") k.k2 = cv.get<double>();
          else if (ck == "safety") k.safety = cv.get<double>();
          else if (ck == "Hmin") k.Hmin = cv.get<double>();
          else if (ck == "Hmax") k.Hmax = cv.is_string() ? std::stod(cv.get<std::string>()) : cv.get<double>();
          else if (ck == "Mmin") k.Mmin = cv.get<std::size_t>();
          else if (ck == "Mmax") k.Mmax = cv.get<std::size_t>();
          else if (ck == "growth") k.growth = cv.get<double>();
          else if (ck == "shrink") k.shrink = cv.get<double>();
          else if (ck == "H0") k.H0 = cv.get<double>();
          else if (ck == "M0") k.M0 = cv.get<std::size_t>();
          else throw FormatError("config: unknown controller key '" + ck + "'");
        }
      } else if (key == "scan") c.scan = parse_scan_kind(v.get<std::string>());
      else if (key == "fast_sector") c.fast = {v.at("angle").get<double>(), v.at("radius").get<double>()};
      else if (key == "implicit_sector") c.implicit = {v.at("angle").get<double>(), v.at("radius").get<double>()};
      else if (key == "window") {
        c.window = {v.at("re_min").get<double>(), v.at("re_max").get<double>(), v.at("im_min").get<double>(),
                    v.at("im_max").get<double>(), v.at("nx").get<std::size_t>(), v.at("ny").get<std::size_t>()};
      } else if (key == "sampling") {
        c.sampling = {v.at("ray").get<std::size_t>(), v.at("arc").get<std::size_t>(),
                      v.at("lattice_r").get<std::size_t>(), v.at("lattice_a").get<std::size_t>()};
      } else {
        throw FormatError("config: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
}

inline std::string series_csv(const Series& s) {
  std::ostringstream os;
  const bool adaptive = s.kind == ExperimentKind::Adaptive;
  os << (adaptive ? "tol" : "k,H,M")
     << ",max_error,runtime_s,fast_f_evals,implicit_solves,accepted,rejected,failed,in_fit\n";
  for (const auto& r : s.rows) {
    if (adaptive) os << format_double(r.tol);
    else os << r.k << ',' << format_double(r.H) << ',' << r.M;
    os << ',' << format_double(r.max_error) << ',' << format_double(r.runtime_s) << ',' << r.fast_f_evals << ','
       << r.implicit_solves << ',' << r.accepted << ',' << r.rejected << ',' << (r.failed ? 1 : 0) << ','
       << (r.in_fit ? 1 : 0) << '\n';
  }
  return os.str();
}

inline std::string step_log_csv(const std::vector<StepLogEntry>& log) {
  std::ostringstream os;
  os << "t,H,M,epsS,epsF,accepted\n";
  for (const auto& e : log)
    os << format_double(e.t) << ',' << format_double(e.H) << ',' << e.M << ',' << format_double(e.eps_s) << ','
       << format_double(e.eps_f) << ',' << (e.accepted ? 1 : 0) << '\n';
  return os.str();
}

inline nlohmann::json series_json(const Series& s, const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["config"] = config_to_json(cfg);
  j["experiment"] = to_string(s.kind);
  j["method"] = s.method;
  j["inner"] = s.inner;
  j["problem"] = s.problem;
  j["slope"] = s.slope ? nlohmann::json(*s.slope) : nlohmann::json(nullptr);
  j["fit_floor"] = s.floor;
  j["fit_abscissa"] = s.kind == ExperimentKind::Adaptive ? "tol" : "H";
  nlohmann::json fails = nlohmann::json::array();
  for (const auto& r : s.rows)
    if (r.failed) fails.push_back({{"H", json_number(r.H)}, {"tol", r.tol}, {"failure", r.failure}});
  j["failed_rows"] = fails;
  return j;
}

inline std::string scan_csv(const RegionScan& s) {
  std::ostringstream os;
  os << "re,im,stable,max_abs_r\n";
  for (std::size_t iy = 0; iy < s.window.ny; ++iy)
    for (std::size_t ix = 0; ix < s.window.nx; ++ix) {
      const cplx z = s.window.node(ix, iy);
      const std::size_t cell = iy * s.window.nx + ix;
      os << format_double(z.real()) << ',' << format_double(z.imag()) << ',' << int(s.stable[cell]) << ','
         << format_double(s.max_abs_r[cell]) << '\n';
    }
  return os.str();
}

inline nlohmann::json scan_json(const RegionScan& s, const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["config"] = config_to_json(cfg);
  j["method"] = s.method;
  j["kind"] = to_string(s.kind);
  j["fast_sector"] = {{"angle", s.fast.angle}, {"radius", s.fast.radius}};
  if (s.kind == ScanKind::Joint) j["implicit_sector"] = {{"angle", s.implicit.angle}, {"radius", s.implicit.radius}};
  j["tolerance"] = s.options.tol;
  j["early_exit"] = s.options.early_exit;
  j["stable_cells"] = s.stable_count();
  j["total_cells"] = s.stable.size();
  return j;
}

inline nlohmann::json verify_json(const VerifyReport& r) {
  nlohmann::json j;
  j["method"] = r.method;
  j["inner"] = r.inner;
  nlohmann::json f = nlohmann::json::array();
  for (const auto& x : r.findings) f.push_back({{"kind", to_string(x.kind)}, {"message", x.message}});
  j["findings"] = f;
  if (!r.findings.empty()) return j;
  auto report = [](const OrderReport& rep) {
    nlohmann::json c = nlohmann::json::array();
    for (const auto& x : rep.conditions)
      c.push_back({{"label", x.label}, {"residual", to_string(x.residual)}, {"pass", x.pass}});
    return nlohmann::json{{"order", rep.order}, {"passed", rep.passed()}, {"conditions", c}};
  };
  j["internal_consistency"] = report(r.consistency);
  j["base"] = nlohmann::json::array();
  for (const auto& b : r.base) j["base"].push_back(report(b));
  j["coupling"] = nlohmann::json::array();
  for (const auto& c : r.coupling) j["coupling"].push_back(report(c));
  j["base_order"] = r.base_order;
  j["coupling_order"] = r.coupling_order;
  j["claimed_order"] = r.claimed_order;
  j["tableau_order"] = r.tableau_order;
  j["paired_order"] = r.paired_order;
  j["c_statistic"] = r.c_stat ? nlohmann::json(*r.c_stat) : nlohmann::json(nullptr);
  j["note"] = r.note;
  j["stability_spot_error"] = r.stability_spot_error;
  j["ok"] = r.ok();
  return j;
}

inline std::string verify_table(const std::vector<VerifyReport>& reports) {
  std::ostringstream os;
  os << std::left << std::setw(16) << "method" << std::setw(18) << "inner" << std::setw(8) << "struct"
     << std::setw(8) << "consist" << std::setw(6) << "base" << std::setw(10) << "coupling" << std::setw(8) << "order"
     << std::setw(12) << "C-stat" << "note\n";
  for (const auto& r : reports) {
    os << std::setw(16) << r.method << std::setw(18) << r.inner << std::setw(8) << (r.findings.empty() ? "ok" : "FAIL");
    if (!r.findings.empty()) {
      os << r.findings.size() << " finding(s)\n";
      continue;
    }
    std::ostringstream cs;
    if (r.c_stat) cs << std::setprecision(5) << *r.c_stat;
    else cs << "-";
    os << std::setw(8) << (r.consistency.passed() ? "ok" : "FAIL") << std::setw(6) << r.base_order << std::setw(10)
       << r.coupling_order << std::setw(8) << (std::to_string(r.tableau_order) + "/" + std::to_string(r.claimed_order))
       << std::setw(12) << cs.str() << r.note << '\n';
  }
  return os.str();
}

inline std::string file_stem(const std::string& s) {
  std::string out;
  for (char ch : s) out += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '.') ? ch : '_';
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

/// Writes <experiment>_<method>_<problem>.csv with its JSON sidecar (and,
/// for adaptive series, one step log per tolerance). Returns the CSV paths.
inline std::vector<std::string> write_series(const std::vector<Series>& all, const ExperimentConfig& cfg) {
  std::vector<std::string> paths;
  const std::filesystem::path dir(cfg.out_dir.empty() ? "." : cfg.out_dir);
  for (const auto& s : all) {
    const std::string stem = to_string(s.kind) + "_" + file_stem(s.method) + "_" + file_stem(s.problem);
    write_text(dir / (stem + ".csv"), series_csv(s));
    write_text(dir / (stem + ".json"), series_json(s, cfg).dump(2) + "\n");
    paths.push_back((dir / (stem + ".csv")).string());
    for (std::size_t i = 0; i < s.logs.size(); ++i) {
      std::ostringstream tol;
      tol << std::setprecision(3) << s.rows[i].tol;
      write_text(dir / (stem + "_steps_tol" + file_stem(tol.str()) + ".csv"), step_log_csv(s.logs[i]));
    }
  }
  return paths;
}

inline std::vector<std::string> write_scans(const std::vector<RegionScan>& all, const ExperimentConfig& cfg) {
  std::vector<std::string> paths;
  const std::filesystem::path dir(cfg.out_dir.empty() ? "." : cfg.out_dir);
  for (const auto& s : all) {
    std::ostringstream stem;
    stem << "stability_" << file_stem(s.method) << "_" << to_string(s.kind) << "_a" << s.fast.angle;
    if (s.kind == ScanKind::Joint) stem << "_b" << s.implicit.angle;
    write_text(dir / (stem.str() + ".csv"), scan_csv(s));
    write_text(dir / (stem.str() + ".json"), scan_json(s, cfg).dump(2) + "\n");
    paths.push_back((dir / (stem.str() + ".csv")).string());
  }
  return paths;
}

inline std::string write_verify(const std::vector<VerifyReport>& all, const ExperimentConfig& cfg) {
  const std::filesystem::path dir(cfg.out_dir.empty() ? "." : cfg.out_dir);
  nlohmann::json j;
  j["config"] = config_to_json(cfg);
  j["reports"] = nlohmann::json::array();
  for (const auto& r : all) j["reports"].push_back(verify_json(r));
  write_text(dir / "verify.json", j.dump(2) + "\n");
  write_text(dir / "verify.txt", verify_table(all));
  return (dir / "verify.json").string();
}

}  // namespace mrisr
