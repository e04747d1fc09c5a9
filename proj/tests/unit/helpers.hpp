#pragma once

#include <vector>

#include "otmap/measure.hpp"
#include "otmap/rng.hpp"

namespace testutil {

inline otmap::PointSet points_1d(std::initializer_list<double> xs) {
  return otmap::PointSet(std::vector<double>(xs), 1);
}

inline otmap::PointSet random_points(otmap::Rng& rng, std::size_t n, std::size_t d,
                                     double scale = 1.0) {
  otmap::PointSet p(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) p[i][k] = scale * (2.0 * otmap::uniform01(rng) - 1.0);
  return p;
}

// Random positive weights; sometimes a coarse grid of values to provoke ties
// and degenerate bases.
inline std::vector<double> random_weights(otmap::Rng& rng, std::size_t n, bool coarse) {
  std::vector<double> w(n);
  for (auto& x : w)
    x = coarse ? 1.0 + static_cast<double>(otmap::uniform_index(rng, 3)) : 0.05 + otmap::uniform01(rng);
  return w;
}

inline otmap::DiscreteMeasure random_measure(otmap::Rng& rng, std::size_t n, std::size_t d,
                                             bool uniform_weights, bool coarse = false) {
  auto pts = random_points(rng, n, d);
  if (uniform_weights) return otmap::DiscreteMeasure::uniform(std::move(pts));
  return otmap::DiscreteMeasure::normalized(std::move(pts), random_weights(rng, n, coarse));
}

}  // namespace testutil
