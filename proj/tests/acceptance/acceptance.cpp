// Acceptance suite: one PASS/FAIL line per criterion. Every threshold below
// is fixed; nothing is tuned from the observed result.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "otmap/applications.hpp"
#include "otmap/baryproj.hpp"
#include "otmap/experiments.hpp"
#include "otmap/numerics.hpp"
#include "otmap/ot_core.hpp"
#include "otmap/smoothing.hpp"

using namespace otmap;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double time_limit_s;
  std::function<Outcome()> run;
};

std::string num(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

SyntheticProblem diag_linear(const std::vector<double>& diag) {
  const auto d = static_cast<Eigen::Index>(diag.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index k = 0; k < d; ++k) a(k, k) = diag[static_cast<std::size_t>(k)];
  return make_linear_problem(a, Eigen::VectorXd::Zero(d), Support::unit_box(diag.size()));
}

// A_kk spread evenly over [1, 2].
SyntheticProblem rate_problem(std::size_t d) {
  std::vector<double> diag(d);
  for (std::size_t k = 0; k < d; ++k) diag[k] = 1.0 + static_cast<double>(k) / static_cast<double>(d - 1);
  return diag_linear(diag);
}

const std::vector<std::size_t> kRateGrid{64, 128, 256, 512, 1024};
constexpr std::size_t kRateReps = 20;

// ------------------------------------------------------------------ 1

Outcome oracle_equivalence() {
  constexpr int kInstances = 200;
  constexpr double kTol = 1e-9;
  Rng rng = make_rng(101);
  int cost_ok = 0, dual_ok = 0, slack_ok = 0;
  double worst = 0.0;
  for (int t = 0; t < kInstances; ++t) {
    const std::size_t d = 1 + static_cast<std::size_t>(t % 3);
    const std::size_t m = 1 + uniform_index(rng, 5), n = 1 + uniform_index(rng, 5);
    const int style = (t / 3) % 3;  // uniform, random or coarse tied weights
    auto measure = [&](std::size_t k) {
      PointSet p(k, d);
      for (auto& c : p.coords()) c = style == 2 ? std::round(4.0 * uniform01(rng)) : 2.0 * uniform01(rng) - 1.0;
      if (style == 0) return DiscreteMeasure::uniform(std::move(p));
      std::vector<double> w(k);
      for (auto& x : w) x = style == 2 ? 1.0 + static_cast<double>(uniform_index(rng, 3)) : 0.05 + uniform01(rng);
      return DiscreteMeasure::normalized(std::move(p), std::move(w));
    };
    const auto a = measure(m), b = measure(style == 0 && t % 2 == 0 ? m : n);
    const auto fast = solve_ot(a, b);
    const auto slow = brute_force_ot(a, b);
    const double gap = std::abs(fast.cost - slow.cost);
    worst = std::max(worst, gap);
    const auto diag = diagnose(fast);
    cost_ok += gap <= kTol;
    dual_ok += diag.max_dual_violation <= kTol;
    slack_ok += diag.max_slackness_gap <= kTol;
  }
  return {cost_ok == kInstances && dual_ok == kInstances && slack_ok == kInstances,
          "cost " + std::to_string(cost_ok) + "/200 (max gap " + num(worst, 3) + "), dual feasible " +
              std::to_string(dual_ok) + "/200, slackness " + std::to_string(slack_ok) + "/200"};
}

// ------------------------------------------------------------------ 2

Outcome stability() {
  StabilitySweepConfig c;
  c.instances = 100;
  c.seed = 1;
  c.dims = {1, 2, 3};
  c.sizes = {20, 50, 100};
  const auto sweep = run_stability_sweep(c);
  std::size_t linear = 0;
  for (const auto& k : sweep.cases) linear += k.problem_kind == "linear";
  return {sweep.holds == 100, std::to_string(sweep.holds) + "/100 hold (" + std::to_string(linear) +
                                  " linear, " + std::to_string(100 - linear) + " separable)"};
}

// ------------------------------------------------------------- 3 and 5

const RateReport& d2_rates() {
  static std::optional<RateReport> report;
  if (!report) {
    RateConfig c;
    c.n_grid = kRateGrid;
    c.reps = kRateReps;
    c.seed = 2023;
    report = run_rate_experiment(c, rate_problem(2));
  }
  return *report;
}

std::string medians(const RateReport& r, double RatePoint::*field) {
  std::string s;
  for (const auto& p : r.points) s += (s.empty() ? "" : " ") + num(p.*field, 3);
  return s;
}

Outcome slope_within(const std::optional<double>& slope, double target, double tol, const std::string& series) {
  if (!slope) return {false, "slope undefined; medians " + series};
  return {std::abs(*slope - target) <= tol,
          "slope " + num(*slope) + " vs " + num(target) + " +/- " + num(tol) + "; medians " + series};
}

Outcome rate_d2() {
  const auto& r = d2_rates();
  return slope_within(r.map_slope, -0.5, 0.15, medians(r, &RatePoint::median_map));
}

Outcome w2_rate_d2() {
  const auto& r = d2_rates();
  return slope_within(r.w2_slope, -0.5, 0.2, medians(r, &RatePoint::median_w2));
}

// ------------------------------------------------------------------ 4

Outcome rate_d5() {
  RateConfig c;
  c.n_grid = kRateGrid;
  c.reps = kRateReps;
  c.seed = 2024;
  const auto r = run_rate_experiment(c, rate_problem(5));
  return slope_within(r.map_slope, -0.4, 0.2, medians(r, &RatePoint::median_map));
}

// ------------------------------------------------------------------ 6

Outcome smoothing_helps() {
  constexpr std::size_t d = 6, n = 512;
  std::vector<CoordinateMap> maps(d, CoordinateMap{CoordinateMap::Kind::tanh, 1.0, 0.0, 2.0});
  const auto problem = make_separable_problem(
      maps, Support::truncated_normal(std::vector<double>(d, 0.0), std::vector<double>(d, 10.0),
                                      std::vector<double>(d, -40.0), std::vector<double>(d, 40.0)));
  EstimatorConfig plain;
  EstimatorConfig smooth;
  smooth.kind = EstimatorKind::kernel_smoothed;
  smooth.s = 1;
  smooth.m_max = 4096;
  smooth.clamp_atoms = true;
  std::vector<double> e_plain(kRateReps), e_smooth(kRateReps);
  std::size_t atoms = 0;
  parallel_for(kRateReps, 0, [&](std::size_t r) {
    const auto seed = replication_seed(99, n, r);
    e_plain[r] = run_estimator(plain, problem, n, n, seed).map_error;
    const auto s = run_estimator(smooth, problem, n, n, seed);
    e_smooth[r] = s.map_error;
    if (r == 0) atoms = s.atoms;
  });
  const double mp = median(e_plain), ms = median(e_smooth);
  return {ms <= mp, "median error kernel-smoothed " + num(ms) + " vs discrete-discrete " + num(mp) + " (M = " +
                        std::to_string(atoms) + ")"};
}

// ------------------------------------------------------------------ 7

Outcome kernel_order() {
  constexpr double kTol = 1e-6;
  bool ok = true;
  double worst = 0.0;
  for (int s = 0; s <= 2; ++s) {
    const auto m = kernel_moments(hermite_kernel(s));
    for (int j = 0; j <= 2 * s + 1; ++j) {
      const double e = std::abs(m.moments[static_cast<std::size_t>(j)] - (j == 0 ? 1.0 : 0.0));
      worst = std::max(worst, e);
      ok = ok && e < kTol;
    }
  }
  return {ok, "largest moment error " + num(worst, 3) + " over s = 0, 1, 2"};
}

// ------------------------------------------------------------------ 8

Outcome indep_level() {
  constexpr std::size_t n = 200, trials = 1000;
  constexpr double alpha = 0.05;
  NullConfig uniform_null;
  uniform_null.n = n;
  uniform_null.draws = 1000;
  uniform_null.use_cache = false;
  const auto null_u = simulate_null(uniform_null);
  const double crit = quantile(null_u, 1.0 - alpha);

  // Independent data with non-uniform marginals: X normal, Y exponential.
  std::vector<int> reject(trials, 0);
  parallel_for(trials, 0, [&](std::size_t t) {
    Rng rng = make_rng(derive_seed(808, streams::trial, t));
    PointSet x(n, 1), y(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      x[i][0] = standard_normal(rng);
      y[i][0] = -std::log1p(-uniform01(rng));
    }
    reject[t] = indep_test_with_critical(x, y, alpha, crit, 1000, derive_seed(809, streams::trial, t)).reject;
  });
  const double rate = static_cast<double>(std::count(reject.begin(), reject.end(), 1)) / trials;

  NullConfig tn_null = uniform_null;
  tn_null.marginal = NullMarginal::truncated_normal;
  tn_null.seed = 0x746e6f726dULL;
  const auto ks = ks_two_sample(null_u, simulate_null(tn_null));
  const bool ok = rate >= 0.03 && rate <= 0.07 && ks.p_value > 0.01;
  return {ok, "rejection rate " + num(rate, 3) + " in [0.03, 0.07]; null KS distance " + num(ks.distance, 3) +
                  ", p = " + num(ks.p_value, 3) + " > 0.01; critical value " + num(crit)};
}

// ------------------------------------------------------------------ 9

double power(std::size_t n, std::size_t trials, double crit, double rho, bool identical, std::uint64_t seed) {
  std::vector<int> reject(trials, 0);
  parallel_for(trials, 0, [&](std::size_t t) {
    auto [x, y] = gaussian_copula_sample(n, 1, 1, rho, derive_seed(seed, streams::trial, t));
    const auto& yy = identical ? x : y;
    reject[t] = indep_test_with_critical(x, yy, 0.05, crit, 1000, derive_seed(seed + 1, streams::trial, t)).reject;
  });
  return static_cast<double>(std::count(reject.begin(), reject.end(), 1)) / static_cast<double>(trials);
}

Outcome indep_power() {
  constexpr std::size_t trials = 100;
  auto critical = [](std::size_t n) {
    NullConfig c;
    c.n = n;
    c.draws = 1000;
    c.use_cache = false;
    return null_quantile(c, 0.05);
  };
  const double c100 = critical(100), c200 = critical(200), c400 = critical(400);
  const double same = power(200, trials, c200, 0.0, true, 900);
  const double p100 = power(100, trials, c100, 0.5, false, 901);
  const double p200 = power(200, trials, c200, 0.5, false, 902);
  const double p400 = power(400, trials, c400, 0.5, false, 903);
  // Not part of the verdict: a weaker dependence where power is not yet 1.
  const double w100 = power(100, trials, c100, 0.2, false, 904);
  const double w200 = power(200, trials, c200, 0.2, false, 905);
  const double w400 = power(400, trials, c400, 0.2, false, 906);
  const bool ok = same >= 0.95 && p100 < p200 && p200 < p400;
  return {ok, "Y=X power " + num(same, 3) + " >= 0.95; rho=0.5 power " + num(p100, 3) + ", " + num(p200, 3) + ", " +
                  num(p400, 3) + " must increase strictly (rho=0.2, not judged: " + num(w100, 3) + ", " +
                  num(w200, 3) + ", " + num(w400, 3) + ")"};
}

// ----------------------------------------------------------------- 10

Outcome barycenter() {
  Eigen::MatrixXd a(1, 1);
  a(0, 0) = 2.0;
  const auto problem = make_linear_problem(a, Eigen::VectorXd::Constant(1, 2.0), Support::unit_box(1));
  auto truth = [](double p) { return 1.0 + 1.5 * p; };
  auto median_error = [&](std::size_t n) {
    std::vector<double> e(kRateReps);
    for (std::size_t r = 0; r < kRateReps; ++r) {
      auto [src, tgt] = sample_pair(problem, n, n, replication_seed(10, n, r));
      e[r] = w2_squared_to_quantile_1d(plugin_barycenter(src, tgt).measure(), truth);
    }
    return median(e);
  };
  const double small = median_error(128), large = median_error(1024);

  const auto mu = DiscreteMeasure::uniform(PointSet(std::vector<double>{0.0, 1.0}, 1));
  const auto nu = DiscreteMeasure::uniform(PointSet(std::vector<double>{0.0, 2.0}, 1));
  const auto two = plugin_barycenter(mu, nu);
  std::multiset<double> atoms;
  for (std::size_t i = 0; i < two.atoms.size(); ++i) atoms.insert(two.atoms[i][0]);
  const bool exact = atoms == std::multiset<double>{0.0, 1.5} && two.weights.size() == 2 &&
                     two.weights[0] == 0.5 && two.weights[1] == 0.5;
  return {large < small && exact, "median W2^2 to the true barycenter " + num(large) + " at n=1024 vs " +
                                      num(small) + " at n=128; two-atom case " +
                                      (exact ? "{0, 1.5}" : "WRONG")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> selected;
  app.add_option("--criterion", selected, "Run only these criteria (1-10)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all{
      {1, "exact solver matches the brute-force oracle", 10, oracle_equivalence},
      {2, "stability inequality on 100 instances", 60, stability},
      {3, "discrete-discrete map error rate, d=2", 600, rate_d2},
      {4, "discrete-discrete map error rate, d=5", 900, rate_d5},
      {5, "W2^2 error rate, d=2", 600, w2_rate_d2},
      {6, "kernel smoothing beats plain plug-in, d=6", 1200, smoothing_helps},
      {7, "higher-order kernel moments", 5, kernel_order},
      {8, "independence test level and distribution-freeness", 600, indep_level},
      {9, "independence test power", 600, indep_power},
      {10, "plug-in barycenter", 120, barycenter},
  };

  int failures = 0;
  for (const auto& c : all) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.time_limit_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::cout << "criterion " << c.id << ": " << (pass ? "PASS" : "FAIL") << "  " << c.name << " -- " << o.detail
              << " [" << num(secs, 3) << " s, limit " << c.time_limit_s << " s" << (in_time ? "" : ", EXCEEDED")
              << "]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
