#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "otmap/ot_core.hpp"

namespace otmap {

struct TransportSolution {
  std::vector<PlanEntry> entries;
  // LP duals: u[i] + v[j] <= c(i, j), tight on every entry.
  std::vector<double> u;
  std::vector<double> v;
  std::size_t pivots = 0;
};

/// Primal network simplex for the balanced transportation problem.
///
/// Supplies and demands are rescaled to 2^48 integer units so pivots are exact;
/// the returned masses carry at most ~1e-14 rounding from that rescaling.
/// Strongly feasible spanning trees (Cunningham's leaving-arc rule) rule out
/// cycling on degenerate instances.
TransportSolution solve_transport(const CostMatrix& cost, std::span<const double> supply,
                                  std::span<const double> demand);

}  // namespace otmap
