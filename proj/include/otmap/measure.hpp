#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace otmap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Row-major collection of points in R^d.
class PointSet {
 public:
  PointSet() = default;
  PointSet(std::size_t count, std::size_t dim);
  PointSet(std::vector<double> coords, std::size_t dim);

  std::size_t size() const noexcept { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return size() == 0; }

  std::span<const double> operator[](std::size_t i) const {
    return {coords_.data() + i * dim_, dim_};
  }
  std::span<double> operator[](std::size_t i) { return {coords_.data() + i * dim_, dim_}; }

  const std::vector<double>& coords() const noexcept { return coords_; }
  std::vector<double>& coords() noexcept { return coords_; }

  void push_back(std::span<const double> point);

 private:
  std::vector<double> coords_;
  std::size_t dim_ = 0;
};

double squared_distance(std::span<const double> a, std::span<const double> b);
double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);

/// Neumaier-compensated sum.
double stable_sum(std::span<const double> values);

/// Weighted point cloud; immutable after construction.
///
/// Weights must be strictly positive and sum to one within 1e-12.
class DiscreteMeasure {
 public:
  DiscreteMeasure(PointSet points, std::vector<double> weights);

  /// Equal mass 1/n on each point.
  static DiscreteMeasure uniform(PointSet points);
  /// Rescales positive weights to unit total.
  static DiscreteMeasure normalized(PointSet points, std::vector<double> weights);

  std::size_t size() const noexcept { return points_.size(); }
  std::size_t dim() const noexcept { return points_.dim(); }
  const PointSet& points() const noexcept { return points_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  std::span<const double> point(std::size_t i) const { return points_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }

  /// True when every atom carries mass exactly 1/n (up to 1e-14).
  bool has_uniform_weights() const noexcept;

  /// Weighted mean of the atoms.
  std::vector<double> mean() const;
  /// Sum of w_i * |x_i|^2.
  double second_moment() const;

 private:
  PointSet points_;
  std::vector<double> weights_;
};

void require_same_dim(const DiscreteMeasure& a, const DiscreteMeasure& b);

}  // namespace otmap
