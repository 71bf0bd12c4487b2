#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "mrisr/mrisr.hpp"

using namespace mrisr;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kRowsFailed = 2;

struct Flags {
  std::vector<std::string> methods;
  std::string inner, problem, out, config, controller, scan, window, grid;
  std::optional<double> H0, alpha, rho, beta, xi, reference_gate;
  std::optional<int> kmin, kmax;
  std::optional<std::size_t> M, samples;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::vector<double> tols;
  std::vector<std::string> assignments;
  bool json = false;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);)
    if (!item.empty()) out.push_back(item);
  return out;
}

double parse_number(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw FormatError(what + ": '" + text + "' is not a number");
  return v;
}

std::pair<std::string, double> parse_assignment(const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw FormatError("expected key=value, got '" + kv + "'");
  return {kv.substr(0, eq), parse_number(kv.substr(eq + 1), kv.substr(0, eq))};
}

void apply_controller(ControllerState& st, const std::string& spec) {
  for (const auto& item : split(spec, ',')) {
    const auto [k, v] = parse_assignment(item);
    nlohmann::json j;
    j[k] = v;
    ExperimentConfig tmp;
    tmp.controller = st;
    apply_config_json(tmp, nlohmann::json{{"controller", j}});
    st = tmp.controller;
  }
}

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON config file; flags given on the command line win");
  sub->add_option("--method", f.methods, "builtin name or tableau JSON path (repeat or comma-separate)")->delimiter(',')->allow_extra_args(false);
  sub->add_option("--inner", f.inner, "inner method for every slow method");
  sub->add_option("--out", f.out, "output directory for CSV and JSON files");
  sub->add_option("--seed", f.seed, "seed for randomized checks");
  sub->add_flag("--json", f.json, "print a JSON summary on stdout");
}

void add_problem(CLI::App* sub, Flags& f) {
  sub->add_option("--problem", f.problem, "kpr, brusselator-201, brusselator-801 or brusselator-tv-101");
  sub->add_option("--reference-gate", f.reference_gate, "relative change gate of the self-generated reference");
  sub->add_option("--samples", f.samples, "number of equally spaced sample points");
  sub->add_option("params", f.assignments, "problem overrides as key=value");
}

void add_schedule(CLI::App* sub, Flags& f) {
  sub->add_option("--H0", f.H0, "H_k = H0 / 2^k");
  sub->add_option("--kmin", f.kmin);
  sub->add_option("--kmax", f.kmax);
  sub->add_option("--m", f.M, "substeps per slow step");
}

ExperimentConfig build_config(ExperimentKind kind, const Flags& f) {
  ExperimentConfig c;
  c.kind = kind;
  switch (kind) {
    case ExperimentKind::Verify:
    case ExperimentKind::Converge:
    case ExperimentKind::Stability: c.methods = builtin_names(); break;
    case ExperimentKind::Efficiency:
      c.methods = {"imex-mri-sr21", "imex-mri-sr32", "imex-mri-sr43"};
      c.problem = "brusselator-201";
      c.H0 = 0.1;
      c.kmin = 0;
      c.kmax = 10;
      break;
    case ExperimentKind::Adaptive:
      c.methods = {"imex-mri-sr21", "imex-mri-sr32", "imex-mri-sr43"};
      c.problem = "brusselator-tv-101";
      break;
  }
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw FormatError("cannot read config file " + f.config);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("config file " + f.config + ": " + e.what());
    }
    if (j.contains("experiment") && parse_experiment_kind(j["experiment"].get<std::string>()) != kind)
      throw FormatError("config file is for experiment '" + j["experiment"].get<std::string>() + "'");
    apply_config_json(c, j);
  }
  if (!f.methods.empty()) c.methods = f.methods;
  if (!f.inner.empty()) c.inner = {{"*", f.inner}};
  if (!f.problem.empty()) c.problem = f.problem;
  for (const auto& kv : f.assignments) {
    const auto [k, v] = parse_assignment(kv);
    c.overrides[k] = v;
  }
  if (f.H0) c.H0 = *f.H0;
  if (f.kmin) c.kmin = *f.kmin;
  if (f.kmax) c.kmax = *f.kmax;
  if (f.M) c.M = *f.M;
  if (f.samples) c.n_samples = *f.samples;
  if (!f.tols.empty()) c.tols = f.tols;
  if (!f.out.empty()) c.out_dir = f.out;
  if (f.seed) c.seed = *f.seed;
  if (f.reference_gate) c.reference_gate = *f.reference_gate;
  if (f.threads) c.threads = *f.threads;
  if (!f.controller.empty()) apply_controller(c.controller, f.controller);
  if (!f.scan.empty()) c.scan = parse_scan_kind(f.scan);
  if (f.alpha) c.fast.angle = *f.alpha;
  if (f.rho) c.fast.radius = *f.rho;
  if (f.beta) c.implicit.angle = *f.beta;
  if (f.xi) c.implicit.radius = *f.xi;
  if (!f.window.empty()) {
    const auto parts = split(f.window, ',');
    if (parts.size() != 4) throw FormatError("--window needs re_min,re_max,im_min,im_max");
    c.window.re_min = parse_number(parts[0], "window");
    c.window.re_max = parse_number(parts[1], "window");
    c.window.im_min = parse_number(parts[2], "window");
    c.window.im_max = parse_number(parts[3], "window");
  }
  if (!f.grid.empty()) {
    const auto parts = split(f.grid, ',');
    if (parts.size() != 2) throw FormatError("--grid needs nx,ny");
    c.window.nx = static_cast<std::size_t>(parse_number(parts[0], "grid"));
    c.window.ny = static_cast<std::size_t>(parse_number(parts[1], "grid"));
  }
  for (const auto& m : c.methods) resolve_method(m);
  for (const auto& [m, in] : c.inner) load_inner(in);
  c.validate();
  return c;
}

int list_methods(const Flags& f) {
  nlohmann::json j;
  j["methods"] = nlohmann::json::array();
  for (const auto& name : builtin_names()) {
    const auto t = load_builtin(name);
    j["methods"].push_back({{"name", name},
                            {"stages", t.stages()},
                            {"n_omega", t.n_omega()},
                            {"order", claimed_order(name)},
                            {"embedded", t.has_embedding()},
                            {"default_inner", default_inner_for(name)}});
  }
  j["inner"] = nlohmann::json::array();
  for (const auto& name : builtin_inner_names()) {
    const auto b = load_inner(name);
    j["inner"].push_back({{"name", name}, {"stages", b.stages()}, {"order", b.order},
                          {"embedded_order", b.emb_order ? nlohmann::json(*b.emb_order) : nlohmann::json(nullptr)}});
  }
  j["problems"] = problem_names();
  if (f.json) {
    std::cout << j.dump(2) << '\n';
    return kOk;
  }
  std::printf("%-16s %6s %7s %5s %8s  %s\n", "method", "stages", "nOmega", "order", "embedded", "default inner");
  for (const auto& m : j["methods"])
    std::printf("%-16s %6zu %7zu %5d %8s  %s\n", m["name"].get<std::string>().c_str(), m["stages"].get<std::size_t>(),
                m["n_omega"].get<std::size_t>(), m["order"].get<int>(), m["embedded"].get<bool>() ? "yes" : "no",
                m["default_inner"].get<std::string>().c_str());
  std::printf("\n%-18s %6s %5s\n", "inner", "stages", "order");
  for (const auto& m : j["inner"])
    std::printf("%-18s %6zu %5d\n", m["name"].get<std::string>().c_str(), m["stages"].get<std::size_t>(), m["order"].get<int>());
  std::printf("\nproblems:");
  for (const auto& p : problem_names()) std::printf(" %s", p.c_str());
  std::printf("\n");
  return kOk;
}

void print_series(const std::vector<Series>& all, const ExperimentConfig& c, bool json) {
  if (json) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& s : all) {
      auto sj = series_json(s, c);
      sj.erase("config");
      sj["rows"] = nlohmann::json::array();
      for (const auto& r : s.rows)
        sj["rows"].push_back({{"k", r.k}, {"H", json_number(r.H)}, {"tol", r.tol}, {"M", r.M},
                              {"max_error", json_number(r.max_error)}, {"runtime_s", r.runtime_s},
                              {"fast_f_evals", r.fast_f_evals}, {"implicit_solves", r.implicit_solves},
                              {"accepted", r.accepted}, {"rejected", r.rejected}, {"failed", r.failed},
                              {"in_fit", r.in_fit}});
      j.push_back(sj);
    }
    std::cout << j.dump(2) << '\n';
    return;
  }
  for (const auto& s : all) {
    std::cout << "# " << to_string(s.kind) << ' ' << s.method << " / " << s.inner << " on " << s.problem << ", slope "
              << (s.slope ? format_double(*s.slope) : std::string("undefined")) << '\n'
              << series_csv(s);
    for (const auto& r : s.rows)
      if (r.failed) std::cout << "# failed row: " << r.failure << '\n';
  }
}

int series_exit(const std::vector<Series>& all) {
  for (const auto& s : all)
    if (s.any_failed()) return kRowsFailed;
  return kOk;
}

int run_series_command(ExperimentKind kind, const Flags& f) {
  auto c = build_config(kind, f);
  std::vector<Series> all;
  if (kind == ExperimentKind::Adaptive) {
    all = run_adaptive(c);
  } else if (kind == ExperimentKind::Converge && c.problem == "kpr" && !f.kmin && !f.kmax && f.config.empty()) {
    // Default KPR schedules: k = 4..11 for the SR methods, 2..9 for MERK.
    for (const auto& m : c.methods) {
      auto one = c;
      one.methods = {m};
      const bool merk = resolve_method(m).name.rfind("merk", 0) == 0;
      one.kmin = merk ? 2 : 4;
      one.kmax = merk ? 9 : 11;
      auto s = run_convergence(one);
      all.insert(all.end(), s.begin(), s.end());
    }
  } else {
    all = kind == ExperimentKind::Converge ? run_convergence(c) : run_efficiency(c);
  }
  if (!c.out_dir.empty()) write_series(all, c);
  print_series(all, c, f.json);
  return series_exit(all);
}

int run_verify_command(const Flags& f) {
  const auto c = build_config(ExperimentKind::Verify, f);
  const auto reports = run_verify(c);
  if (!c.out_dir.empty()) write_verify(reports, c);
  if (f.json) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : reports) j.push_back(verify_json(r));
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << verify_table(reports);
  }
  for (const auto& r : reports)
    if (!r.ok()) return kRowsFailed;
  return kOk;
}

int run_stability_command(const Flags& f) {
  const auto c = build_config(ExperimentKind::Stability, f);
  const auto scans = run_stability(c);
  if (!c.out_dir.empty()) write_scans(scans, c);
  if (f.json) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& s : scans) {
      auto sj = scan_json(s, c);
      sj.erase("config");
      j.push_back(sj);
    }
    std::cout << j.dump(2) << '\n';
  } else {
    for (const auto& s : scans)
      std::printf("%-16s %-8s alpha %5g rho %8g  stable %zu / %zu\n", s.method.c_str(), to_string(s.kind).c_str(),
                  s.fast.angle, s.fast.radius, s.stable_count(), s.stable.size());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Implicit-explicit multirate stage-restart integrators: verification, convergence, stability and adaptive runs"};
  app.require_subcommand(1);
  Flags f;

  auto* verify = app.add_subcommand("verify", "order conditions, structure and stability spot checks of tableaux");
  add_common(verify, f);

  auto* converge = app.add_subcommand("converge", "fixed-step convergence series");
  add_common(converge, f);
  add_problem(converge, f);
  add_schedule(converge, f);

  auto* efficiency = app.add_subcommand("efficiency", "fixed-step runs with runtime and cost counters");
  add_common(efficiency, f);
  add_problem(efficiency, f);
  add_schedule(efficiency, f);

  auto* stability = app.add_subcommand("stability", "joint or component stability region scans");
  add_common(stability, f);
  stability->add_option("--scan", f.scan, "joint, explicit or implicit");
  stability->add_option("--alpha", f.alpha, "fast sector angle in degrees");
  stability->add_option("--rho", f.rho, "fast sector radius");
  stability->add_option("--beta", f.beta, "implicit sector angle in degrees (joint scans)");
  stability->add_option("--xi", f.xi, "implicit sector radius (joint scans)");
  stability->add_option("--window", f.window, "re_min,re_max,im_min,im_max");
  stability->add_option("--grid", f.grid, "nx,ny");
  stability->add_option("--threads", f.threads, "worker threads, 0 for all cores");

  auto* adaptive = app.add_subcommand("adaptive", "adaptive runs over a tolerance schedule");
  add_common(adaptive, f);
  add_problem(adaptive, f);
  adaptive->add_option("--tol", f.tols, "tolerances (repeat or comma-separate)")->delimiter(',')->allow_extra_args(false);
  adaptive->add_option("--controller", f.controller, "controller settings, e.g. k1=0.42,k2=0.44,safety=0.9");

  auto* list = app.add_subcommand("list-methods", "builtin slow and inner methods and problems");
  list->add_flag("--json", f.json, "print JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*list) return list_methods(f);
    if (*verify) return run_verify_command(f);
    if (*converge) return run_series_command(ExperimentKind::Converge, f);
    if (*efficiency) return run_series_command(ExperimentKind::Efficiency, f);
    if (*adaptive) return run_series_command(ExperimentKind::Adaptive, f);
    if (*stability) return run_stability_command(f);
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const LookupError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRowsFailed;
  }
  return kUsage;
}
