#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "otmap/measure.hpp"
#include "otmap/rng.hpp"

namespace otmap {

/// Compact product support for the source law mu.
///
/// box: uniform on [lower, upper]. truncated_normal: independent coordinates,
/// N(mean_k, sd_k^2) conditioned on [lower_k, upper_k].
struct Support {
  enum class Kind { box, truncated_normal };
  Kind kind = Kind::box;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> mean;
  std::vector<double> sd;

  static Support unit_box(std::size_t d);
  static Support box(std::vector<double> lower, std::vector<double> upper);
  static Support truncated_normal(std::vector<double> mean, std::vector<double> sd,
                                  std::vector<double> lower, std::vector<double> upper);

  std::size_t dim() const noexcept { return lower.size(); }
  void validate() const;
  void sample(Rng& rng, std::span<double> out) const;
  /// Density of coordinate k.
  double coordinate_density(std::size_t k, double x) const;
  /// Inverse CDF of coordinate k, p in [0, 1].
  double coordinate_quantile(std::size_t k, double p) const;
};

/// Strictly increasing smooth map R -> R used coordinatewise.
///
///   identity: x
///   affine:   a x + b
///   cubic:    a x + b + c x^3      (a > 0, c >= 0)
///   tanh:     a x + b + c tanh(x)  (a > 0, a + c > 0)
struct CoordinateMap {
  enum class Kind { identity, affine, cubic, tanh };
  Kind kind = Kind::identity;
  double a = 1.0;
  double b = 0.0;
  double c = 0.0;

  double operator()(double x) const;
  double derivative(double x) const;
  /// Antiderivative G with G(0) = 0; G is convex.
  double potential(double x) const;
  /// g^{-1}(y) by bisection.
  double inverse(double y) const;
  /// sup_x [x y - G(x)].
  double conjugate(double y) const;
  void validate() const;
};

/// Ground-truth transport problem mu -> nu = T0 # mu with T0 = grad phi0.
class SyntheticProblem {
 public:
  enum class Kind { linear, separable };

  Kind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return support_.dim(); }
  const Support& support() const noexcept { return support_; }
  const Eigen::MatrixXd& matrix() const noexcept { return a_; }
  const Eigen::VectorXd& shift() const noexcept { return b_; }
  const std::vector<CoordinateMap>& maps() const noexcept { return maps_; }

  /// Lipschitz constant of T0 on the support.
  double lipschitz() const noexcept { return lipschitz_; }
  /// W2^2(mu, nu) = E|X - T0(X)|^2.
  double true_w2sq() const noexcept { return true_w2sq_; }

  void transport(std::span<const double> x, std::span<double> out) const;
  std::vector<double> transport(std::span<const double> x) const;
  /// Convex potential phi0 with grad phi0 = T0.
  double potential(std::span<const double> x) const;
  /// Legendre dual phi0*.
  double conjugate(std::span<const double> y) const;
  /// grad phi0* = T0^{-1}.
  std::vector<double> inverse_transport(std::span<const double> y) const;

  /// E[T0(X)] under mu.
  std::vector<double> pushforward_mean() const;

  PointSet sample_source(std::size_t n, Rng& rng) const;
  PointSet push_forward(const PointSet& x) const;

  nlohmann::json to_json() const;

  friend SyntheticProblem make_linear_problem(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                              Support support);
  friend SyntheticProblem make_separable_problem(std::vector<CoordinateMap> maps,
                                                 Support support);

 private:
  SyntheticProblem() = default;

  Kind kind_ = Kind::linear;
  Support support_;
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  std::vector<CoordinateMap> maps_;
  double lipschitz_ = 0.0;
  double true_w2sq_ = 0.0;
};

/// T0(x) = A x + b with A symmetric positive definite.
SyntheticProblem make_linear_problem(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                     Support support);
/// T0(x)_k = g_k(x_k).
SyntheticProblem make_separable_problem(std::vector<CoordinateMap> maps, Support support);

/// Builds a problem from its JSON description. Every problem found is appended
/// to `errors`; returns nullopt when there is at least one.
std::optional<SyntheticProblem> problem_from_json(const nlohmann::json& spec,
                                                  std::vector<std::string>& errors,
                                                  const std::string& where = "problem");
/// Throwing variant.
SyntheticProblem problem_from_json(const nlohmann::json& spec);

enum class SamplingMode {
  /// Y = T0 applied to a fresh mu-sample, independent of X.
  independent,
  /// Y_i = T0(X_i); requires m == n.
  paired,
};

std::pair<DiscreteMeasure, DiscreteMeasure> sample_pair(const SyntheticProblem& problem,
                                                        std::size_t m, std::size_t n,
                                                        std::uint64_t seed,
                                                        SamplingMode mode = SamplingMode::independent);

}  // namespace otmap
