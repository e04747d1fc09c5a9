#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "otmap/baryproj.hpp"
#include "otmap/measure.hpp"

namespace otmap {

// ------------------------------------------------------------- barycenter

struct BarycenterEstimate {
  /// (x_i + T_hat(x_i)) / 2 for each source atom.
  PointSet atoms;
  /// Source weights.
  std::vector<double> weights;

  DiscreteMeasure measure() const;
};

BarycenterEstimate plugin_barycenter(const DiscreteMeasure& src, const DiscreteMeasure& tgt);

/// W2^2 between a 1D discrete measure and the law with quantile function q,
/// by quadrature over the quantile blocks of the atoms.
double w2_squared_to_quantile_1d(const DiscreteMeasure& measure,
                                 const std::function<double(double)>& q);

// ------------------------------------------------------- independence test

/// Optimal matching of the data atoms onto an equal-size reference sample.
BarycentricMap semi_discrete_rank_map(const DiscreteMeasure& data, const PointSet& reference);
/// Reference drawn uniformly on [0,1]^d from `seed`.
BarycentricMap semi_discrete_rank_map(const DiscreteMeasure& data, std::uint64_t seed);

struct GaussianKernel {
  double bandwidth = 1.0;
  /// exp(-|a - b|^2 / (2 bandwidth^2)).
  double operator()(std::span<const double> a, std::span<const double> b) const;
};

/// Median of the pairwise distances of a point set.
double median_heuristic(const PointSet& points);

/// Gaussian kernel whose bandwidth is the median heuristic on a fixed
/// uniform reference sample of size n in [0,1]^d. It depends on (n, d) only,
/// so the test statistic stays distribution-free.
GaussianKernel reference_kernel(std::size_t n, std::size_t d);

/// Gram matrix K(images_i, images_j), row-major.
std::vector<double> gram_matrix(const PointSet& images, const GaussianKernel& kernel);

/// Three-term V-statistic from the two Gram matrices:
///   n^-2 sum K_ij L_ij + n^-4 sum K_ij sum L_rs - 2 n^-3 sum_i (sum_j K_ij)(sum_r L_ir).
double hsic_from_gram(const std::vector<double>& k, const std::vector<double>& l, std::size_t n);

double hsic_statistic(const BarycentricMap& x_map, const BarycentricMap& y_map,
                      const GaussianKernel& kernel_x, const GaussianKernel& kernel_y);

/// Marginal law used to simulate the null distribution.
enum class NullMarginal { uniform, truncated_normal };

struct NullConfig {
  std::size_t n = 0;
  std::size_t d1 = 1;
  std::size_t d2 = 1;
  std::size_t draws = 1000;
  std::uint64_t seed = 0x6e756c6cULL;
  NullMarginal marginal = NullMarginal::uniform;
  unsigned threads = 0;
  /// Read and write the on-disk cache (directory from OTMAP_CACHE_DIR) when set.
  bool use_cache = true;
};

/// Monte-Carlo draws of n * HS under independence, sorted ascending. Each
/// draw uses fresh data and fresh reference samples; draw i depends only on
/// (seed, i).
std::vector<double> simulate_null(const NullConfig& config);

/// Upper (1 - alpha) quantile of the simulated null of n * HS.
double null_quantile(const NullConfig& config, double alpha);

/// Cache file for a null configuration, or nullopt when OTMAP_CACHE_DIR is unset.
std::optional<std::string> null_cache_path(const NullConfig& config);

struct IndepTestResult {
  double statistic = 0.0;
  double n_times_stat = 0.0;
  double critical_value = 0.0;
  bool reject = false;
  double alpha = 0.05;
  std::size_t null_draws = 0;

  nlohmann::json to_json() const;
};

struct IndepConfig {
  std::size_t null_draws = 1000;
  std::uint64_t null_seed = 0x6e756c6cULL;
  unsigned threads = 0;
  bool use_cache = true;
};

/// Rank maps for both samples (references from `seed`), statistic, and the
/// simulated critical value. Rows of x and y are paired observations.
IndepTestResult indep_test(const PointSet& x, const PointSet& y, double alpha,
                           const IndepConfig& config, std::uint64_t seed);

/// Same test against a critical value computed elsewhere.
IndepTestResult indep_test_with_critical(const PointSet& x, const PointSet& y, double alpha,
                                         double critical_value, std::size_t null_draws,
                                         std::uint64_t seed);

/// Paired sample with uniform marginals whose coordinate k of X and Y
/// (k < min(d1, d2)) are linked through a Gaussian copula of correlation rho.
std::pair<PointSet, PointSet> gaussian_copula_sample(std::size_t n, std::size_t d1, std::size_t d2,
                                                     double rho, std::uint64_t seed);

struct PopulationHsic {
  double value = 0.0;
  double std_error = 0.0;
};

using JointSampler = std::function<std::pair<std::vector<double>, std::vector<double>>(Rng&)>;
using TransportFn = std::function<std::vector<double>(std::span<const double>)>;

/// Monte-Carlo value of
///   E[K1(T1 X1, T1 X2) K2(T2 Y1, T2 Y2)] + E[K1(T1 X1, T1 X2)] E[K2(T2 Y1, T2 Y2)]
///   - 2 E[K1(T1 X1, T1 X2) K2(T2 Y1, T2 Y3)]
/// from mc_size groups of four independent pairs.
PopulationHsic population_hsic(const JointSampler& sampler, const TransportFn& t1,
                               const TransportFn& t2, const GaussianKernel& kernel_x,
                               const GaussianKernel& kernel_y, std::size_t mc_size,
                               std::uint64_t seed);

/// Two-sample Kolmogorov-Smirnov distance and asymptotic p-value.
struct KsResult {
  double distance = 0.0;
  double p_value = 1.0;
};
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

}  // namespace otmap
