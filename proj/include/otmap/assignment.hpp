#pragma once

#include <cstddef>
#include <vector>

#include "otmap/ot_core.hpp"

namespace otmap {

struct AssignmentResult {
  std::vector<std::size_t> col_of_row;
  double total_cost = 0.0;
  // Dual variables with u[i] + v[j] <= c(i, j), tight on the assignment.
  std::vector<double> u;
  std::vector<double> v;
};

/// Minimum-cost perfect matching on a square cost matrix.
///
/// Jonker-Volgenant shortest augmenting paths after column reduction and
/// augmenting row reduction. O(n^3) worst case.
AssignmentResult solve_assignment(const CostMatrix& cost);

}  // namespace otmap
