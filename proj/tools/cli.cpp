#include "cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "otmap/applications.hpp"
#include "otmap/config_util.hpp"
#include "otmap/experiments.hpp"
#include "otmap/io.hpp"
#include "otmap/ot_core.hpp"
#include "otmap/smoothing.hpp"

namespace otmap::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = 0;
};

/// Thrown after every configuration problem has been collected.
struct ConfigErrors {
  std::vector<std::string> errors;
};

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

json load_config(const Common& c) {
  if (c.config.empty()) return json::object();
  std::ifstream in(c.config);
  if (!in) throw Error("cannot open config '" + c.config + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(c.config + ": " + e.what());
  }
}

/// Paths inside a config are relative to the config file.
std::string resolve(const Common& c, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute() || c.config.empty()) return path;
  return (fs::path(c.config).parent_path() / path).string();
}

void finish(JsonFields& f, std::vector<std::string>& errors) {
  f.reject_unknown();
  if (!errors.empty()) throw ConfigErrors{errors};
}

void emit(const Common& c, const std::string& name, const std::string& contents, std::ostream& out) {
  if (c.out.empty()) return;
  const auto path = (fs::path(c.out) / name).string();
  write_text_file(path, contents);
  out << "wrote " << path << '\n';
}

std::vector<std::size_t> positive_sizes(JsonFields& f, const std::string& key,
                                        std::vector<std::size_t> fallback) {
  if (!f.has(key)) return fallback;
  std::vector<std::size_t> out;
  for (auto v : f.integer_list(key)) {
    if (v <= 0)
      f.error(f.path(key) + ": entries must be positive");
    else
      out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

// ------------------------------------------------------------------ solve

int cmd_solve(const Common& c, const std::vector<std::string>& inputs, std::ostream& out) {
  const json cfg = load_config(c);
  std::vector<std::string> errors;
  JsonFields f(cfg, "config", errors);
  std::string source = resolve(c, f.string("source", "")), target = resolve(c, f.string("target", ""));
  const bool verify = f.boolean("verify", true);
  if (!inputs.empty()) {
    if (inputs.size() != 2) f.error("solve: expected two point-cloud files, got " + std::to_string(inputs.size()));
    else {
      source = inputs[0];
      target = inputs[1];
    }
  }
  if (inputs.empty() && (source.empty() || target.empty()))
    f.error("solve: give the source and target files as arguments or as config.source and config.target");
  finish(f, errors);

  const auto src = read_point_cloud(source);
  const auto tgt = read_point_cloud(target);
  if (src.dim() != tgt.dim())
    throw Error("dimension mismatch: " + source + " has " + std::to_string(src.dim()) + " columns, " + target +
                " has " + std::to_string(tgt.dim()));
  SolveOptions options;
  options.verify = verify;
  const auto plan = solve_ot(src, tgt, options);

  out << "cost " << fmt(plan.cost) << '\n';
  out << "source_atoms " << src.size() << "\ntarget_atoms " << tgt.size() << "\nplan_entries "
      << plan.entries.size() << '\n';
  if (c.out.empty()) {
    out << '\n' << plan_csv(plan) << '\n' << potentials_csv(plan);
  } else {
    emit(c, "plan.csv", plan_csv(plan), out);
    emit(c, "potentials.csv", potentials_csv(plan), out);
  }
  return kExitOk;
}

// ------------------------------------------------------------------ rates

int cmd_rates(const Common& c, std::ostream& out) {
  const json cfg = load_config(c);
  std::vector<std::string> errors;
  JsonFields f(cfg, "config", errors);

  std::optional<SyntheticProblem> problem;
  if (const json* p = f.raw("problem"))
    problem = problem_from_json(*p, errors, "config.problem");
  else
    f.error("config.problem: required");

  RateConfig rc;
  if (const json* e = f.raw("estimator")) rc.estimator = estimator_from_json(*e, errors, "config.estimator");
  rc.n_grid = positive_sizes(f, "n_grid", {});
  if (!f.has("n_grid")) f.error("config.n_grid: required");
  const auto reps = f.integer("reps", 20);
  if (reps < 10) f.error("config.reps: must be at least 10");
  rc.reps = static_cast<std::size_t>(std::max<std::int64_t>(reps, 0));
  rc.seed = c.seed ? *c.seed : f.unsigned_integer("seed", 1);
  if (c.seed) f.allow("seed");
  rc.threads = c.threads;

  std::optional<double> expect_slope, expect_tol;
  std::string metric = "map";
  if (const json* e = f.raw("expect")) {
    JsonFields g(*e, "config.expect", errors);
    if (g.ok()) {
      expect_slope = g.number("slope", 0.0, true);
      expect_tol = g.number("tolerance", 0.0, true);
      metric = g.string("metric", "map", false, {"map", "w2"});
      if (*expect_tol < 0.0) g.error("config.expect.tolerance: must be non-negative");
      g.reject_unknown();
    }
  }
  finish(f, errors);

  const auto report = run_rate_experiment(rc, *problem);
  const auto summary = rate_summary_json(report);
  out << summary.dump(2) << '\n';
  emit(c, "rates_rows.csv", rate_rows_csv(report), out);
  emit(c, "rates_summary.json", summary.dump(2) + "\n", out);

  if (!expect_slope) return kExitOk;
  const auto& slope = metric == "map" ? report.map_slope : report.w2_slope;
  const bool pass = slope && std::abs(*slope - *expect_slope) <= *expect_tol;
  out << metric << " slope " << (slope ? fmt(*slope) : std::string("undefined")) << " vs expected "
      << *expect_slope << " +/- " << *expect_tol << ": " << (pass ? "pass" : "FAIL") << '\n';
  return pass ? kExitOk : kExitThreshold;
}

// -------------------------------------------------------------- stability

int cmd_stability(const Common& c, std::ostream& out) {
  const json cfg = load_config(c);
  std::vector<std::string> errors;
  JsonFields f(cfg, "config", errors);
  StabilitySweepConfig sc;
  const auto instances = f.integer("instances", 100);
  if (instances <= 0) f.error("config.instances: must be positive");
  sc.instances = static_cast<std::size_t>(std::max<std::int64_t>(instances, 0));
  sc.seed = c.seed ? *c.seed : f.unsigned_integer("seed", 1);
  if (c.seed) f.allow("seed");
  sc.dims = positive_sizes(f, "dims", sc.dims);
  sc.sizes = positive_sizes(f, "sizes", sc.sizes);
  if (sc.dims.empty()) f.error("config.dims: must be non-empty");
  if (sc.sizes.empty()) f.error("config.sizes: must be non-empty");
  sc.threads = c.threads;
  finish(f, errors);

  const auto sweep = run_stability_sweep(sc);
  out << sweep.holds << "/" << sweep.cases.size() << " hold\n";
  for (const auto& k : sweep.cases)
    if (!k.report.holds)
      out << "  instance " << k.index << " (" << k.problem_kind << ", d=" << k.dim << ", m=" << k.m
          << ", n=" << k.n << "): lhs " << fmt(k.report.lhs) << " > rhs "
          << fmt(k.report.rhs_max_term + k.report.rhs_phi_term) << '\n';
  emit(c, "stability.csv", stability_cases_csv(sweep), out);
  return sweep.holds == sweep.cases.size() ? kExitOk : kExitThreshold;
}

// ------------------------------------------------------------- barycenter

int cmd_barycenter(const Common& c, std::ostream& out) {
  const json cfg = load_config(c);
  std::vector<std::string> errors;
  JsonFields f(cfg, "config", errors);
  const bool from_files = f.has("source") || f.has("target");
  const bool from_problem = f.has("problem");
  std::string source, target;
  std::optional<SyntheticProblem> problem;
  std::size_t m = 0, n = 0;
  std::uint64_t seed = 0;
  if (from_files == from_problem) {
    f.error("config: give either source and target files or a problem");
  } else if (from_files) {
    source = resolve(c, f.string("source", "", true));
    target = resolve(c, f.string("target", "", true));
  } else {
    problem = problem_from_json(*f.raw("problem"), errors, "config.problem");
    const auto nn = f.integer("n", 0, true);
    const auto mm = f.integer("m", nn);
    if (nn <= 0) f.error("config.n: must be positive");
    if (mm <= 0) f.error("config.m: must be positive");
    n = static_cast<std::size_t>(std::max<std::int64_t>(nn, 0));
    m = static_cast<std::size_t>(std::max<std::int64_t>(mm, 0));
    seed = c.seed ? *c.seed : f.unsigned_integer("seed", 1);
    if (c.seed) f.allow("seed");
  }
  finish(f, errors);

  const auto [src, tgt] = problem ? sample_pair(*problem, m, n, seed)
                                  : std::pair{read_point_cloud(source), read_point_cloud(target)};
  const auto bary = plugin_barycenter(src, tgt);
  const auto measure = bary.measure();
  out << "atoms " << bary.atoms.size() << '\n';
  out << "w2sq_to_source " << fmt(w2_squared(measure, src)) << '\n';
  out << "w2sq_to_target " << fmt(w2_squared(measure, tgt)) << '\n';
  if (problem && problem->dim() == 1) {
    // Population barycenter of mu and T0 # mu is ((id + T0) / 2) # mu.
    const auto& p = *problem;
    const double to_truth = w2_squared_to_quantile_1d(measure, [&p](double q) {
      const double x = p.support().coordinate_quantile(0, q);
      return 0.5 * (x + p.transport(std::span<const double>(&x, 1))[0]);
    });
    out << "w2sq_to_population " << fmt(to_truth) << '\n';
  }
  emit(c, "barycenter.csv", point_cloud_csv(bary.atoms, &bary.weights), out);
  return kExitOk;
}

// ------------------------------------------------------------------ indep

int cmd_indep(const Common& c, std::ostream& out) {
  const json cfg = load_config(c);
  std::vector<std::string> errors;
  JsonFields f(cfg, "config", errors);
  const bool from_files = f.has("x") || f.has("y");
  const json* copula = f.raw("copula");
  std::string xs, ys;
  std::size_t n = 0, d1 = 1, d2 = 1;
  double rho = 0.0;
  if (from_files == (copula != nullptr)) {
    f.error("config: give either x and y files or a copula block");
  } else if (from_files) {
    xs = resolve(c, f.string("x", "", true));
    ys = resolve(c, f.string("y", "", true));
  } else {
    JsonFields g(*copula, "config.copula", errors);
    if (g.ok()) {
      const auto nn = g.integer("n", 0, true);
      const auto a = g.integer("d1", 1), b = g.integer("d2", 1);
      rho = g.number("rho", 0.0, true);
      if (nn < 2) g.error("config.copula.n: must be at least 2");
      if (a <= 0 || b <= 0) g.error("config.copula: d1 and d2 must be positive");
      if (!(std::abs(rho) < 1.0)) g.error("config.copula.rho: must lie in (-1, 1)");
      n = static_cast<std::size_t>(std::max<std::int64_t>(nn, 0));
      d1 = static_cast<std::size_t>(std::max<std::int64_t>(a, 1));
      d2 = static_cast<std::size_t>(std::max<std::int64_t>(b, 1));
      g.reject_unknown();
    }
  }
  const double alpha = f.number("alpha", 0.05);
  if (!(alpha > 0.0 && alpha < 1.0)) f.error("config.alpha: must lie in (0, 1)");
  IndepConfig ic;
  const auto draws = f.integer("null_draws", 1000);
  if (draws < 200) f.error("config.null_draws: must be at least 200");
  ic.null_draws = static_cast<std::size_t>(std::max<std::int64_t>(draws, 0));
  ic.null_seed = f.unsigned_integer("null_seed", ic.null_seed);
  ic.use_cache = f.boolean("use_cache", true);
  ic.threads = c.threads;
  const std::uint64_t seed = c.seed ? *c.seed : f.unsigned_integer("seed", 1);
  if (c.seed) f.allow("seed");
  std::optional<bool> expect_reject;
  if (f.has("expect_reject")) expect_reject = f.boolean("expect_reject", false);
  finish(f, errors);

  PointSet x, y;
  if (from_files) {
    const auto mx = read_point_cloud(xs), my = read_point_cloud(ys);
    if (mx.size() != my.size())
      throw Error("x and y must have the same number of rows (" + std::to_string(mx.size()) + " vs " +
                  std::to_string(my.size()) + ")");
    x = mx.points();
    y = my.points();
  } else {
    std::tie(x, y) = gaussian_copula_sample(n, d1, d2, rho, derive_seed(seed, streams::source_sample));
  }
  const auto result = indep_test(x, y, alpha, ic, seed);
  const auto js = result.to_json();
  out << js.dump(2) << '\n';
  emit(c, "indep.json", js.dump(2) + "\n", out);
  if (expect_reject && *expect_reject != result.reject) {
    out << "expected " << (*expect_reject ? "rejection" : "no rejection") << ": FAIL\n";
    return kExitThreshold;
  }
  return kExitOk;
}

// ----------------------------------------------------------- kernel-check

int cmd_kernel_check(const Common& c, const std::vector<int>& s_flag, std::ostream& out) {
  const json cfg = load_config(c);
  std::vector<std::string> errors;
  JsonFields f(cfg, "config", errors);
  std::vector<int> orders{0, 1, 2};
  if (const json* s = f.raw("s")) {
    orders.clear();
    auto take = [&](const json& v) {
      if (v.is_number_integer() && v.get<std::int64_t>() >= 0 && v.get<std::int64_t>() <= 6)
        orders.push_back(v.get<int>());
      else
        f.error("config.s: expected integers in [0, 6]");
    };
    if (s->is_array())
      for (const auto& v : *s) take(v);
    else
      take(*s);
  }
  f.allow("s");
  const double tol = f.number("tolerance", 1e-6);
  if (!(tol > 0.0)) f.error("config.tolerance: must be positive");
  for (int s : s_flag)
    if (s < 0 || s > 6) f.error("--s: expected integers in [0, 6]");
  finish(f, errors);
  if (!s_flag.empty()) orders = s_flag;

  std::ostringstream csv;
  csv << "s,j,moment,target,abs_error,ok\n";
  bool all_ok = true;
  out << std::left << std::setw(4) << "s" << std::setw(4) << "j" << std::setw(26) << "moment"
      << std::setw(8) << "target" << "ok\n";
  for (int s : orders) {
    const auto kernel = hermite_kernel(s);
    const auto m = kernel_moments(kernel);
    for (std::size_t j = 0; j + 1 < m.moments.size(); ++j) {
      const double target = j == 0 ? 1.0 : 0.0;
      const double e = std::abs(m.moments[j] - target);
      const bool ok = e < tol;
      all_ok = all_ok && ok;
      out << std::setw(4) << s << std::setw(4) << j << std::setw(26) << fmt(m.moments[j]) << std::setw(8)
          << target << (ok ? "yes" : "NO") << '\n';
      csv << s << ',' << j << ',' << fmt(m.moments[j]) << ',' << target << ',' << fmt(e) << ','
          << (ok ? 1 : 0) << '\n';
    }
  }
  emit(c, "kernel_moments.csv", csv.str(), out);
  return all_ok ? kExitOk : kExitThreshold;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON config file");
  sub->add_option("--seed", c.seed, "Base seed, overrides config.seed");
  sub->add_option("--out", c.out, "Directory for data files");
  sub->add_option("--threads", c.threads, "Worker threads (0 = all cores); never changes results");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Plug-in optimal transport map estimation and experiments", "otmap"};
  app.require_subcommand(1);
  Common common;
  std::vector<std::string> inputs;
  std::vector<int> s_flag;

  auto* solve = app.add_subcommand("solve", "Exact OT between two point-cloud CSV files");
  add_common(solve, common);
  solve->add_option("inputs", inputs, "SOURCE.csv TARGET.csv");
  auto* rates = app.add_subcommand("rates", "Monte-Carlo convergence-rate experiment");
  add_common(rates, common);
  auto* stability = app.add_subcommand("stability", "Stability inequality sweep over random problems");
  add_common(stability, common);
  auto* barycenter = app.add_subcommand("barycenter", "Plug-in barycenter of two measures");
  add_common(barycenter, common);
  auto* indep = app.add_subcommand("indep", "OT-rank HSIC independence test");
  add_common(indep, common);
  auto* kernel = app.add_subcommand("kernel-check", "Moment table of the higher-order kernels");
  add_common(kernel, common);
  kernel->add_option("--s", s_flag, "Smoothness orders to check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitError;
  }

  try {
    if (*solve) return cmd_solve(common, inputs, out);
    if (*rates) return cmd_rates(common, out);
    if (*stability) return cmd_stability(common, out);
    if (*barycenter) return cmd_barycenter(common, out);
    if (*indep) return cmd_indep(common, out);
    if (*kernel) return cmd_kernel_check(common, s_flag, out);
  } catch (const ConfigErrors& e) {
    err << "invalid configuration (" << e.errors.size() << " problem" << (e.errors.size() == 1 ? "" : "s")
        << "):\n";
    for (const auto& m : e.errors) err << "  " << m << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}

}  // namespace otmap::cli
