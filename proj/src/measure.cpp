#include "otmap/measure.hpp"

#include <cmath>

namespace otmap {

PointSet::PointSet(std::size_t count, std::size_t dim) : coords_(count * dim, 0.0), dim_(dim) {
  if (dim == 0) throw Error("PointSet: dimension must be positive");
}

PointSet::PointSet(std::vector<double> coords, std::size_t dim)
    : coords_(std::move(coords)), dim_(dim) {
  if (dim == 0) throw Error("PointSet: dimension must be positive");
  if (coords_.size() % dim != 0)
    throw Error("PointSet: coordinate count is not a multiple of the dimension");
}

void PointSet::push_back(std::span<const double> point) {
  if (dim_ == 0) dim_ = point.size();
  if (point.size() != dim_) throw DimensionMismatch("PointSet::push_back: wrong dimension");
  coords_.insert(coords_.end(), point.begin(), point.end());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double squared_norm(std::span<const double> a) { return dot(a, a); }

double stable_sum(std::span<const double> values) {
  double sum = 0.0;
  double comp = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  return sum + comp;
}

DiscreteMeasure::DiscreteMeasure(PointSet points, std::vector<double> weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  if (points_.empty()) throw Error("DiscreteMeasure: no atoms");
  if (weights_.size() != points_.size())
    throw Error("DiscreteMeasure: " + std::to_string(weights_.size()) + " weights for " +
                std::to_string(points_.size()) + " atoms");
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (!(weights_[i] > 0.0) || !std::isfinite(weights_[i]))
      throw Error("DiscreteMeasure: weight " + std::to_string(i) + " is not strictly positive");
  }
  for (double c : points_.coords())
    if (!std::isfinite(c)) throw Error("DiscreteMeasure: non-finite coordinate");
  const double total = stable_sum(weights_);
  if (std::abs(total - 1.0) > 1e-12)
    throw Error("DiscreteMeasure: weights sum to " + std::to_string(total) + ", expected 1");
}

DiscreteMeasure DiscreteMeasure::uniform(PointSet points) {
  const std::size_t n = points.size();
  if (n == 0) throw Error("DiscreteMeasure: no atoms");
  return DiscreteMeasure(std::move(points), std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

DiscreteMeasure DiscreteMeasure::normalized(PointSet points, std::vector<double> weights) {
  for (double w : weights)
    if (!(w > 0.0)) throw Error("DiscreteMeasure: weights must be strictly positive");
  const double total = stable_sum(weights);
  for (double& w : weights) w /= total;
  return DiscreteMeasure(std::move(points), std::move(weights));
}

bool DiscreteMeasure::has_uniform_weights() const noexcept {
  const double target = 1.0 / static_cast<double>(size());
  for (double w : weights_)
    if (std::abs(w - target) > 1e-14) return false;
  return true;
}

std::vector<double> DiscreteMeasure::mean() const {
  std::vector<double> m(dim(), 0.0);
  for (std::size_t i = 0; i < size(); ++i) {
    const auto p = point(i);
    for (std::size_t k = 0; k < dim(); ++k) m[k] += weights_[i] * p[k];
  }
  return m;
}

double DiscreteMeasure::second_moment() const {
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) s += weights_[i] * squared_norm(point(i));
  return s;
}

void require_same_dim(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  if (a.dim() != b.dim())
    throw DimensionMismatch("dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                            std::to_string(b.dim()));
}

}  // namespace otmap
