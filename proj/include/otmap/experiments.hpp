#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "otmap/baryproj.hpp"
#include "otmap/synthetic.hpp"

namespace otmap {

enum class EstimatorKind { discrete_discrete, semi_discrete, kernel_smoothed, wavelet_smoothed };

std::string to_string(EstimatorKind kind);
/// Accepts "discrete-discrete", "semi-discrete", "kernel-smoothed-discretized",
/// "wavelet-smoothed-discretized" (and the short forms "kernel", "wavelet").
EstimatorKind estimator_kind_from_string(const std::string& name);

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::discrete_discrete;
  /// Smoothness used by the smoothed kinds (bandwidth, kernel order, Haar level).
  int s = 1;
  /// Largest number of atoms drawn from a smoothed density.
  std::size_t m_max = 4096;
  /// When the size rule exceeds m_max: clamp to m_max instead of failing.
  bool clamp_atoms = false;
  /// Dense reference size for semi-discrete runs in d >= 2, as a multiple of max(m, n).
  std::size_t reference_factor = 50;
  SamplingMode sampling = SamplingMode::independent;
};

/// ceil(n^{(s+2)/2}).
std::size_t discretization_size(std::size_t n, int s);

enum class Regime { none, besov, sobolev };

Regime regime_from_string(const std::string& name);
std::string to_string(Regime regime);

struct ExponentInfo {
  /// Positive exponent a in the bound n^{-a}.
  double exponent = 0.0;
  /// Log factors that the bound carries but the exponent leaves out.
  std::string log_factor_note;
};

ExponentInfo theoretical_exponent(Regime regime, int d, int s);
/// Regime matching an estimator: unsmoothed kinds -> none, kernel -> sobolev,
/// wavelet -> besov.
Regime regime_of(EstimatorKind kind);

struct EstimatorResult {
  /// sum over the source discretization of |T_hat - T0|^2.
  double map_error = 0.0;
  /// |W2^2(estimate) - W2^2(mu, nu)|.
  double w2_error = 0.0;
  double w2sq_estimate = 0.0;
  double w2sq_true = 0.0;
  /// Atoms per side of the matched discretization.
  std::size_t atoms = 0;
};

/// One replication of an estimator on m source and n target samples.
EstimatorResult run_estimator(const EstimatorConfig& config, const SyntheticProblem& problem,
                              std::size_t m, std::size_t n, std::uint64_t seed);

struct RateRow {
  std::size_t n = 0;
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  EstimatorResult result;
};

struct RatePoint {
  std::size_t n = 0;
  double median_map = 0.0;
  double iqr_map = 0.0;
  double median_w2 = 0.0;
  double iqr_w2 = 0.0;
};

struct RateReport {
  EstimatorConfig estimator;
  std::size_t dim = 0;
  std::vector<std::size_t> n_grid;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  std::vector<RateRow> rows;  // ordered by (n, rep)
  std::vector<RatePoint> points;

  /// Least-squares slope of log(median error) on log(n); empty when some
  /// median is not positive.
  std::optional<double> map_slope;
  std::optional<double> w2_slope;
  std::string slope_note;

  Regime regime = Regime::none;
  /// Negative of ExponentInfo::exponent, to compare with the slopes directly.
  double theoretical_slope = 0.0;
  std::string log_factor_note;

  /// |W2 - W2_true| <= |W2^2 - W2^2_true| / W2_true on every replication
  /// (checked only when W2_true > 0).
  std::size_t w2_identity_checked = 0;
  std::size_t w2_identity_holds = 0;
};

struct RateConfig {
  EstimatorConfig estimator;
  std::vector<std::size_t> n_grid;
  std::size_t reps = 20;
  std::uint64_t seed = 1;
  /// Worker threads; 0 = hardware concurrency. Never changes results.
  unsigned threads = 0;
};

/// m = n at every grid size. Replication (n, r) uses
/// derive_seed(derive_seed(seed, replication, n), trial, r).
RateReport run_rate_experiment(const RateConfig& config, const SyntheticProblem& problem);

/// Seed of replication `rep` at size n.
std::uint64_t replication_seed(std::uint64_t seed, std::size_t n, std::size_t rep);

/// One row per (n, rep).
std::string rate_rows_csv(const RateReport& report);
nlohmann::json rate_summary_json(const RateReport& report);

/// Random problem used by the stability sweep: a linear map with a random
/// symmetric positive definite matrix (eigenvalues in [0.5, 2.5]) and shift,
/// or a separable map with random affine, cubic or tanh coordinates, on a
/// random box.
SyntheticProblem random_problem(std::size_t d, Rng& rng);

struct StabilitySweepConfig {
  std::size_t instances = 100;
  std::uint64_t seed = 1;
  std::vector<std::size_t> dims{1, 2, 3};
  std::vector<std::size_t> sizes{20, 50, 100};
  unsigned threads = 0;
};

struct StabilityCase {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::string problem_kind;
  std::size_t dim = 0;
  std::size_t m = 0;
  std::size_t n = 0;
  StabilityReport report;
};

struct StabilitySweep {
  std::vector<StabilityCase> cases;
  std::size_t holds = 0;
};

/// Instance i draws its dimension, sizes and problem from
/// derive_seed(seed, trial, i) and evaluates the stability inequality at the
/// optimal plan.
StabilitySweep run_stability_sweep(const StabilitySweepConfig& config);
std::string stability_cases_csv(const StabilitySweep& sweep);

/// Parses an estimator block ({"kind", "s", "m_max", "clamp_atoms",
/// "reference_factor", "sampling"}) from `obj`, collecting every error.
EstimatorConfig estimator_from_json(const nlohmann::json& obj, std::vector<std::string>& errors,
                                    const std::string& where = "estimator");

/// Runs `count` independent jobs on up to `threads` workers; job i writes only
/// slot i of its output, so schedules never change results.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& job);

}  // namespace otmap
