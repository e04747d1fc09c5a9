#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "otmap/measure.hpp"
#include "otmap/rng.hpp"

namespace otmap {

/// Univariate kernel of order 2s+2 built from Hermite polynomials:
///   K(u) = phi(u) * sum_{m <= 2s+2} He_m(0) He_m(u) / m!
/// with phi the standard normal density and He_m the probabilists' Hermite
/// polynomials (orthogonal for the weight exp(-u^2/2)).
struct KernelSpec {
  int s = 0;
  int order = 2;
  /// Monomial coefficients of the polynomial factor, lowest degree first.
  std::vector<double> poly;
  /// Beyond this radius the integrals of |K| and |u|^order |K| are below 1e-10.
  double support_radius = 0.0;
  /// Integral of |K| over the real line.
  double l1_norm = 1.0;

  double operator()(double u) const;
  double eval(double u) const { return (*this)(u); }
};

KernelSpec hermite_kernel(int s);

struct KernelMoments {
  /// moments[j] = integral of u^j K(u), j = 0..order.
  std::vector<double> moments;
  /// Integral of |u|^order |K(u)|.
  double abs_moment = 0.0;
};

/// Moments by adaptive Gauss-Kronrod quadrature on [-R, R], R = support_radius.
KernelMoments kernel_moments(const KernelSpec& kernel);

/// Throws Error when a moment condition fails at tolerance `tol`.
void check_kernel_moments(const KernelSpec& kernel, double tol = 1e-6);

/// h = n^{-1/(d+2s)} ln n.
double bandwidth(double n, int d, int s);

enum class DensityMode { raw, positive_part };

/// Product-kernel density estimate of a sample.
class SmoothedDensity {
 public:
  SmoothedDensity(PointSet sample, KernelSpec kernel, double h, DensityMode mode,
                  std::uint64_t seed = 0);

  const PointSet& sample() const noexcept { return sample_; }
  const KernelSpec& kernel() const noexcept { return kernel_; }
  double bandwidth() const noexcept { return h_; }
  DensityMode mode() const noexcept { return mode_; }
  std::size_t dim() const noexcept { return sample_.dim(); }
  /// Integral of max(f, 0); 1 in raw mode.
  double norm_constant() const noexcept { return norm_; }

  /// (1/(m h^d)) sum_i prod_k K((X_ik - x_k)/h).
  double raw(std::span<const double> x) const;
  /// Same sum with |K| in place of K; dominates |raw(x)|.
  double envelope(std::span<const double> x) const;
  /// raw(x) in raw mode, max(raw(x), 0)/norm_constant otherwise.
  double operator()(std::span<const double> x) const;
  /// raw(x) and envelope(x) in one pass.
  void sums(std::span<const double> x, double& signed_sum, double& abs_sum) const;

 private:
  PointSet sample_;
  KernelSpec kernel_;
  double h_;
  DensityMode mode_;
  double norm_ = 1.0;
};

double kde_eval(const SmoothedDensity& f, std::span<const double> x);

struct SamplerStats {
  std::size_t proposals = 0;
  std::size_t accepted = 0;
  double acceptance() const {
    return proposals == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposals);
  }
};

/// Accept-reject draws from max(f, 0)/norm.
///
/// Proposals come from the mixture (1/m) sum_i prod_k |K|((x_k - X_ik)/h)/(h |K|_1):
/// pick a data point, then draw each coordinate offset from |K| (itself by
/// accept-reject under a Gaussian envelope). A proposal x is kept with
/// probability max(raw(x), 0)/envelope(x). Throws when the acceptance rate
/// falls below 1e-3.
PointSet sample_positive_part(const SmoothedDensity& f, std::size_t count, std::uint64_t seed,
                              SamplerStats* stats = nullptr);

/// Tensor-Haar density estimate on a rescaled box.
///
/// Data are mapped affinely into [0,1)^d. The series keeps the scaling
/// coefficient and all detail coefficients of levels 0..J-1, which
/// telescopes to the histogram on the dyadic grid of level J.
class WaveletDensity {
 public:
  std::size_t dim() const noexcept { return lower_.size(); }
  int level() const noexcept { return level_; }
  std::size_t sample_size() const noexcept { return m_; }
  const std::vector<double>& lower() const noexcept { return lower_; }
  const std::vector<double>& upper() const noexcept { return upper_; }

  /// Maps a point into the unit cube coordinates of the fit.
  std::vector<double> to_unit(std::span<const double> x) const;

  /// a_phi = (1/m) sum_i phi(X_i) for the level-0 scaling function (always 1).
  double scaling_coefficient() const noexcept { return scaling_; }
  /// Detail coefficient b for level j, cell multi-index `cell`, and type
  /// e in {1..2^d-1} (bit k set: Haar mother in coordinate k).
  double detail_coefficient(int j, std::span<const std::uint64_t> cell, unsigned type) const;

  /// Series value in unit-cube coordinates.
  double series_unit(std::span<const double> u) const;
  /// Histogram value in unit-cube coordinates: count / (m * cell volume).
  double histogram_unit(std::span<const double> u) const;
  /// Density in the original coordinates (series divided by the box volume).
  double operator()(std::span<const double> x) const;

  /// Exact draws: choose a data cell with probability count/m, then a
  /// uniform point in it; mapped back to original coordinates.
  PointSet sample(std::size_t count, std::uint64_t seed) const;

  friend WaveletDensity haar_wavelet_fit(const PointSet& sample, int s,
                                         std::optional<std::pair<std::vector<double>, std::vector<double>>> box);

 private:
  std::vector<double> lower_, upper_;
  int level_ = 0;
  std::size_t m_ = 0;
  double scaling_ = 1.0;
  // Per level: cell key -> 2^d - 1 detail coefficients (types 1..2^d-1).
  std::vector<std::unordered_map<std::uint64_t, std::vector<double>>> details_;
  // Level-J cell key -> count.
  std::unordered_map<std::uint64_t, std::size_t> counts_;
  std::vector<std::uint64_t> occupied_;        // level-J cell keys, sorted
  std::vector<std::size_t> cumulative_counts_;  // matching prefix sums

  std::uint64_t key(int j, std::span<const std::uint64_t> cell) const;
  std::vector<std::uint64_t> cell_of(int j, std::span<const double> u) const;
};

/// Level J for sample size n: the smallest integer with
/// n^{1/(d+2s)} <= 2^J, kept when 2^J <= n^{1/d}; if no integer fits between
/// the two bounds, the largest J with 2^J <= n^{1/d} (at least 0).
int haar_level(std::size_t n, int d, int s);

/// Fits the Haar estimator. `box` gives the rescaling box; by default the
/// bounding box of the data, padded by range/(2n) on each side.
WaveletDensity haar_wavelet_fit(
    const PointSet& sample, int s,
    std::optional<std::pair<std::vector<double>, std::vector<double>>> box = std::nullopt);

}  // namespace otmap
