#include "otmap/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

#include "otmap/baryproj.hpp"
#include "otmap/config_util.hpp"
#include "otmap/numerics.hpp"
#include "otmap/ot_core.hpp"
#include "otmap/smoothing.hpp"

namespace otmap {

using nlohmann::json;

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::discrete_discrete: return "discrete-discrete";
    case EstimatorKind::semi_discrete: return "semi-discrete";
    case EstimatorKind::kernel_smoothed: return "kernel-smoothed-discretized";
    case EstimatorKind::wavelet_smoothed: return "wavelet-smoothed-discretized";
  }
  return "discrete-discrete";
}

EstimatorKind estimator_kind_from_string(const std::string& name) {
  if (name == "discrete-discrete") return EstimatorKind::discrete_discrete;
  if (name == "semi-discrete") return EstimatorKind::semi_discrete;
  if (name == "kernel-smoothed-discretized" || name == "kernel") return EstimatorKind::kernel_smoothed;
  if (name == "wavelet-smoothed-discretized" || name == "wavelet") return EstimatorKind::wavelet_smoothed;
  throw Error("unknown estimator kind '" + name + "'");
}

std::size_t discretization_size(std::size_t n, int s) {
  if (n == 0) throw Error("discretization_size: n must be positive");
  // Round before ceil so exact powers are not pushed up by rounding error.
  const double raw = std::pow(static_cast<double>(n), (s + 2.0) / 2.0);
  return static_cast<std::size_t>(std::ceil(raw * (1.0 - 1e-14)));
}

Regime regime_from_string(const std::string& name) {
  if (name == "none") return Regime::none;
  if (name == "besov") return Regime::besov;
  if (name == "sobolev") return Regime::sobolev;
  throw Error("unknown regime '" + name + "' (expected none, besov or sobolev)");
}

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::none: return "none";
    case Regime::besov: return "besov";
    case Regime::sobolev: return "sobolev";
  }
  return "none";
}

ExponentInfo theoretical_exponent(Regime regime, int d, int s) {
  if (d < 1) throw Error("theoretical_exponent: d must be positive");
  if (s < 0) throw Error("theoretical_exponent: s must be nonnegative");
  ExponentInfo info;
  if (d == 1) {
    info.exponent = 0.5;
    info.log_factor_note = "d = 1 lies below the tabulated dimensions; parametric rate assumed";
    return info;
  }
  switch (regime) {
    case Regime::none:
      if (d <= 3) {
        info.exponent = 0.5;
      } else if (d == 4) {
        info.exponent = 0.5;
        info.log_factor_note = "d = 4: extra log(1+n) factor";
      } else {
        info.exponent = 2.0 / d;
      }
      if (!info.log_factor_note.empty()) info.log_factor_note += "; ";
      info.log_factor_note += "heavier-tailed sources carry (log n)^t with t = " +
                              std::string(d > 4 ? "2(1+1/d)" : "a d-dependent power") +
                              "; none under compact support";
      break;
    case Regime::besov:
      if (d == 2) {
        info.exponent = 0.5;
        info.log_factor_note = "d = 2: extra log factor";
      } else {
        info.exponent = (1.0 + s) / (d + 2.0 * s);
      }
      break;
    case Regime::sobolev: {
      const int edge = 2 * (s + 2);
      if (d < edge) {
        info.exponent = 0.5;
      } else if (d == edge) {
        info.exponent = 0.5;
        info.log_factor_note = "d = 2(s+2): extra log factor";
      } else {
        info.exponent = (s + 2.0) / d;
      }
      break;
    }
  }
  return info;
}

Regime regime_of(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kernel_smoothed: return Regime::sobolev;
    case EstimatorKind::wavelet_smoothed: return Regime::besov;
    default: return Regime::none;
  }
}

namespace {

// Semi-discrete in d = 1: the optimal map from mu to the sorted atoms y_(1..n)
// sends the quantile block ((k-1)/n, k/n] to y_(k), so both errors reduce to
// one-dimensional integrals in the quantile variable.
EstimatorResult semi_discrete_1d(const SyntheticProblem& problem, const DiscreteMeasure& tgt) {
  const auto& support = problem.support();
  std::vector<std::pair<double, double>> atoms;
  for (std::size_t j = 0; j < tgt.size(); ++j) atoms.emplace_back(tgt.point(j)[0], tgt.weight(j));
  std::sort(atoms.begin(), atoms.end());
  std::vector<double> map_terms, cost_terms;
  double p0 = 0.0;
  for (const auto& [y, w] : atoms) {
    const double p1 = std::min(1.0, p0 + w);
    auto x_of = [&](double p) { return support.coordinate_quantile(0, p); };
    map_terms.push_back(integrate(
        [&](double p) {
          const double x = x_of(p);
          const double t = problem.transport(std::span<const double>(&x, 1))[0];
          return (y - t) * (y - t);
        },
        p0, p1, 1e-10));
    cost_terms.push_back(integrate(
        [&](double p) {
          const double x = x_of(p);
          return (x - y) * (x - y);
        },
        p0, p1, 1e-10));
    p0 = p1;
  }
  EstimatorResult r;
  r.map_error = stable_sum(map_terms);
  r.w2sq_estimate = stable_sum(cost_terms);
  r.atoms = tgt.size();
  return r;
}

EstimatorResult plug_in(const DiscreteMeasure& src, const DiscreteMeasure& tgt,
                        const SyntheticProblem& problem) {
  const auto plan = solve_ot(src, tgt);
  const auto map = barycentric_projection(plan);
  EstimatorResult r;
  r.map_error = map_l2_error(map, problem);
  r.w2sq_estimate = plan.cost;
  r.atoms = src.size();
  return r;
}

std::size_t atoms_for(const EstimatorConfig& config, std::size_t m, std::size_t n) {
  const std::size_t wanted = discretization_size(std::max(m, n), config.s);
  if (wanted <= config.m_max) return wanted;
  if (config.clamp_atoms) return config.m_max;
  throw Error("discretized estimator needs M = " + std::to_string(wanted) +
              " atoms, above m_max = " + std::to_string(config.m_max) +
              " (raise m_max or set clamp_atoms)");
}

}  // namespace

EstimatorResult run_estimator(const EstimatorConfig& config, const SyntheticProblem& problem,
                              std::size_t m, std::size_t n, std::uint64_t seed) {
  if (m == 0 || n == 0) throw Error("run_estimator: sample sizes must be positive");
  const int d = static_cast<int>(problem.dim());
  EstimatorResult r;
  switch (config.kind) {
    case EstimatorKind::discrete_discrete: {
      auto [src, tgt] = sample_pair(problem, m, n, seed, config.sampling);
      r = plug_in(src, tgt, problem);
      break;
    }
    case EstimatorKind::semi_discrete: {
      auto [src, tgt] = sample_pair(problem, m, n, seed, config.sampling);
      if (d == 1) {
        r = semi_discrete_1d(problem, tgt);
      } else {
        Rng rng = make_rng(derive_seed(seed, streams::dense_reference));
        const std::size_t n_ref = config.reference_factor * std::max(m, n);
        auto dense = DiscreteMeasure::uniform(problem.sample_source(n_ref, rng));
        r = plug_in(dense, tgt, problem);
      }
      break;
    }
    case EstimatorKind::kernel_smoothed: {
      const std::size_t atoms = atoms_for(config, m, n);
      auto [src, tgt] = sample_pair(problem, m, n, seed, config.sampling);
      const auto kernel = hermite_kernel(config.s);
      SmoothedDensity fx(src.points(), kernel, bandwidth(static_cast<double>(m), d, config.s),
                         DensityMode::positive_part, derive_seed(seed, streams::smoothing_source, 1));
      SmoothedDensity fy(tgt.points(), kernel, bandwidth(static_cast<double>(n), d, config.s),
                         DensityMode::positive_part, derive_seed(seed, streams::smoothing_target, 1));
      auto xs = sample_positive_part(fx, atoms, derive_seed(seed, streams::smoothing_source));
      auto ys = sample_positive_part(fy, atoms, derive_seed(seed, streams::smoothing_target));
      r = plug_in(DiscreteMeasure::uniform(std::move(xs)), DiscreteMeasure::uniform(std::move(ys)),
                  problem);
      break;
    }
    case EstimatorKind::wavelet_smoothed: {
      const std::size_t atoms = atoms_for(config, m, n);
      auto [src, tgt] = sample_pair(problem, m, n, seed, config.sampling);
      const auto wx = haar_wavelet_fit(src.points(), config.s);
      const auto wy = haar_wavelet_fit(tgt.points(), config.s);
      auto xs = wx.sample(atoms, derive_seed(seed, streams::smoothing_source));
      auto ys = wy.sample(atoms, derive_seed(seed, streams::smoothing_target));
      r = plug_in(DiscreteMeasure::uniform(std::move(xs)), DiscreteMeasure::uniform(std::move(ys)),
                  problem);
      break;
    }
  }
  r.w2sq_true = problem.true_w2sq();
  r.w2_error = std::abs(r.w2sq_estimate - r.w2sq_true);
  return r;
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& job) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> failures(count);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) {
        try {
          job(i);
        } catch (...) {
          failures[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  // Lowest index first, so the reported failure does not depend on timing.
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
}

std::uint64_t replication_seed(std::uint64_t seed, std::size_t n, std::size_t rep) {
  return derive_seed(derive_seed(seed, streams::replication, n), streams::trial, rep);
}

namespace {

double iqr(const std::vector<double>& v) { return quantile(v, 0.75) - quantile(v, 0.25); }

std::optional<double> log_slope(const std::vector<RatePoint>& points, double RatePoint::*field) {
  std::vector<double> lx, ly;
  for (const auto& p : points) {
    const double v = p.*field;
    if (!(v > 0.0) || !std::isfinite(v)) return std::nullopt;
    lx.push_back(std::log(static_cast<double>(p.n)));
    ly.push_back(std::log(v));
  }
  return ols_slope(lx, ly);
}

}  // namespace

RateReport run_rate_experiment(const RateConfig& config, const SyntheticProblem& problem) {
  if (config.n_grid.size() < 4) throw Error("run_rate_experiment: n_grid needs at least 4 sizes");
  if (!std::is_sorted(config.n_grid.begin(), config.n_grid.end()) ||
      std::adjacent_find(config.n_grid.begin(), config.n_grid.end()) != config.n_grid.end())
    throw Error("run_rate_experiment: n_grid must be strictly ascending");
  if (config.n_grid.front() == 0) throw Error("run_rate_experiment: sizes must be positive");
  if (config.reps < 10) throw Error("run_rate_experiment: reps must be at least 10");

  RateReport report;
  report.estimator = config.estimator;
  report.dim = problem.dim();
  report.n_grid = config.n_grid;
  report.reps = config.reps;
  report.seed = config.seed;

  const std::size_t total = config.n_grid.size() * config.reps;
  report.rows.resize(total);
  // Largest sizes first so the slowest jobs do not trail at the end.
  parallel_for(total, config.threads, [&](std::size_t job) {
    const std::size_t slot = total - 1 - job;
    const std::size_t g = slot / config.reps, rep = slot % config.reps;
    auto& row = report.rows[slot];
    row.n = config.n_grid[g];
    row.rep = rep;
    row.seed = replication_seed(config.seed, row.n, rep);
    row.result = run_estimator(config.estimator, problem, row.n, row.n, row.seed);
  });

  for (std::size_t g = 0; g < config.n_grid.size(); ++g) {
    std::vector<double> maps, w2s;
    for (std::size_t rep = 0; rep < config.reps; ++rep) {
      const auto& res = report.rows[g * config.reps + rep].result;
      maps.push_back(res.map_error);
      w2s.push_back(res.w2_error);
    }
    report.points.push_back({config.n_grid[g], median(maps), iqr(maps), median(w2s), iqr(w2s)});
  }
  report.map_slope = log_slope(report.points, &RatePoint::median_map);
  report.w2_slope = log_slope(report.points, &RatePoint::median_w2);
  if (!report.map_slope || !report.w2_slope)
    report.slope_note = "slope undefined: a median error is zero or not finite";

  report.regime = regime_of(config.estimator.kind);
  const auto info = theoretical_exponent(report.regime, static_cast<int>(problem.dim()), config.estimator.s);
  report.theoretical_slope = -info.exponent;
  report.log_factor_note = info.log_factor_note;

  const double w2_true = std::sqrt(problem.true_w2sq());
  if (w2_true > 0.0) {
    for (const auto& row : report.rows) {
      const double w2 = std::sqrt(std::max(row.result.w2sq_estimate, 0.0));
      ++report.w2_identity_checked;
      if (std::abs(w2 - w2_true) <= row.result.w2_error / w2_true * (1.0 + 1e-12) + 1e-15)
        ++report.w2_identity_holds;
    }
  }
  return report;
}

std::string rate_rows_csv(const RateReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "n,rep,seed,atoms,map_error,w2_error,w2sq_estimate,w2sq_true\n";
  for (const auto& row : report.rows)
    out << row.n << ',' << row.rep << ',' << row.seed << ',' << row.result.atoms << ','
        << row.result.map_error << ',' << row.result.w2_error << ',' << row.result.w2sq_estimate
        << ',' << row.result.w2sq_true << '\n';
  return out.str();
}

json rate_summary_json(const RateReport& report) {
  json j;
  j["estimator"] = to_string(report.estimator.kind);
  j["s"] = report.estimator.s;
  j["dim"] = report.dim;
  j["n_grid"] = report.n_grid;
  j["reps"] = report.reps;
  j["seed"] = report.seed;
  json pts = json::array();
  for (const auto& p : report.points)
    pts.push_back({{"n", p.n},
                   {"median_map_error", p.median_map},
                   {"iqr_map_error", p.iqr_map},
                   {"median_w2_error", p.median_w2},
                   {"iqr_w2_error", p.iqr_w2}});
  j["points"] = pts;
  j["fitted_slope"] = report.map_slope ? json(*report.map_slope) : json(nullptr);
  j["w2_fitted_slope"] = report.w2_slope ? json(*report.w2_slope) : json(nullptr);
  if (!report.slope_note.empty()) j["slope_note"] = report.slope_note;
  j["regime"] = to_string(report.regime);
  j["theoretical_exponent"] = report.theoretical_slope;
  j["log_factor_note"] = report.log_factor_note;
  j["w2_identity"] = {{"checked", report.w2_identity_checked}, {"holds", report.w2_identity_holds}};
  return j;
}

EstimatorConfig estimator_from_json(const json& obj, std::vector<std::string>& errors,
                                    const std::string& where) {
  EstimatorConfig c;
  JsonFields f(obj, where, errors);
  if (!f.ok()) return c;
  const auto kind = f.string("kind", "discrete-discrete", false,
                             {"discrete-discrete", "semi-discrete", "kernel-smoothed-discretized",
                              "wavelet-smoothed-discretized", "kernel", "wavelet"});
  try {
    c.kind = estimator_kind_from_string(kind);
  } catch (const Error&) {
  }
  const auto s = f.integer("s", 1);
  if (s < 0) f.error(f.path("s") + ": must be nonnegative");
  c.s = static_cast<int>(s);
  c.m_max = f.unsigned_integer("m_max", 4096);
  if (c.m_max == 0) f.error(f.path("m_max") + ": must be positive");
  c.clamp_atoms = f.boolean("clamp_atoms", false);
  c.reference_factor = f.unsigned_integer("reference_factor", 50);
  if (c.reference_factor == 0) f.error(f.path("reference_factor") + ": must be positive");
  c.sampling = f.string("sampling", "independent", false, {"independent", "paired"}) == "paired"
                   ? SamplingMode::paired
                   : SamplingMode::independent;
  f.reject_unknown();
  return c;
}

SyntheticProblem random_problem(std::size_t d, Rng& rng) {
  if (d == 0) throw Error("random_problem: dimension must be positive");
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * uniform01(rng); };

  std::vector<double> lower(d), upper(d);
  for (std::size_t k = 0; k < d; ++k) {
    lower[k] = between(-1.0, 0.0);
    upper[k] = lower[k] + between(0.5, 2.0);
  }
  Support support = uniform01(rng) < 0.75
                        ? Support::box(lower, upper)
                        : Support::truncated_normal(std::vector<double>(d, 0.0), std::vector<double>(d, 1.0),
                                                    std::vector<double>(d, -2.0), std::vector<double>(d, 2.0));

  if (uniform01(rng) < 0.5) {
    const auto k = static_cast<Eigen::Index>(d);
    Eigen::MatrixXd g(k, k);
    for (Eigen::Index r = 0; r < k; ++r)
      for (Eigen::Index c = 0; c < k; ++c) g(r, c) = standard_normal(rng);
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
    Eigen::VectorXd eig(k), shift(k);
    for (Eigen::Index r = 0; r < k; ++r) {
      eig(r) = between(0.5, 2.5);
      shift(r) = between(-1.0, 1.0);
    }
    Eigen::MatrixXd a = q * eig.asDiagonal() * q.transpose();
    a = 0.5 * (a + a.transpose());
    return make_linear_problem(a, shift, std::move(support));
  }

  std::vector<CoordinateMap> maps(d);
  for (auto& m : maps) {
    switch (uniform_index(rng, 3)) {
      case 0: m = {CoordinateMap::Kind::affine, between(0.5, 2.0), between(-1.0, 1.0), 0.0}; break;
      case 1: m = {CoordinateMap::Kind::cubic, between(0.5, 2.0), between(-1.0, 1.0), between(0.0, 1.0)}; break;
      default: m = {CoordinateMap::Kind::tanh, between(0.5, 2.0), between(-1.0, 1.0), between(-0.4, 1.5)}; break;
    }
  }
  return make_separable_problem(std::move(maps), std::move(support));
}

StabilitySweep run_stability_sweep(const StabilitySweepConfig& config) {
  if (config.instances == 0) throw Error("run_stability_sweep: instances must be positive");
  if (config.dims.empty() || config.sizes.empty())
    throw Error("run_stability_sweep: dims and sizes must be non-empty");
  for (auto d : config.dims)
    if (d == 0) throw Error("run_stability_sweep: dimensions must be positive");
  for (auto n : config.sizes)
    if (n == 0) throw Error("run_stability_sweep: sizes must be positive");

  StabilitySweep sweep;
  sweep.cases.resize(config.instances);
  const std::size_t nd = config.dims.size(), ns = config.sizes.size();
  // The grid of (d, m, n) is cycled so every combination appears once the
  // instance count reaches its size.
  parallel_for(config.instances, config.threads, [&](std::size_t i) {
    auto& c = sweep.cases[i];
    c.index = i;
    c.seed = derive_seed(config.seed, streams::trial, i);
    c.dim = config.dims[i % nd];
    c.m = config.sizes[(i / nd) % ns];
    c.n = config.sizes[(i / (nd * ns)) % ns];
    Rng rng = make_rng(c.seed);
    const auto problem = random_problem(c.dim, rng);
    c.problem_kind = problem.kind() == SyntheticProblem::Kind::linear ? "linear" : "separable";
    auto [src, tgt] = sample_pair(problem, c.m, c.n, derive_seed(c.seed, streams::replication));
    c.report = stability_report(src, tgt, problem);
  });
  for (const auto& c : sweep.cases)
    if (c.report.holds) ++sweep.holds;
  return sweep;
}

std::string stability_cases_csv(const StabilitySweep& sweep) {
  std::ostringstream out;
  out.precision(17);
  out << "index,seed,problem,dim,m,n,lhs,rhs_max_term,rhs_phi_term,holds\n";
  for (const auto& c : sweep.cases)
    out << c.index << ',' << c.seed << ',' << c.problem_kind << ',' << c.dim << ',' << c.m << ','
        << c.n << ',' << c.report.lhs << ',' << c.report.rhs_max_term << ',' << c.report.rhs_phi_term
        << ',' << (c.report.holds ? 1 : 0) << '\n';
  return out.str();
}

}  // namespace otmap
