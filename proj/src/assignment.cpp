#include "otmap/assignment.hpp"

#include <cmath>
#include <limits>

namespace otmap {

// Jonker-Volgenant: column reduction, reduction transfer, two passes of
// augmenting row reduction, then Dijkstra-style augmentation for the rows
// that are still free.
AssignmentResult solve_assignment(const CostMatrix& cost) {
  const std::size_t n = cost.rows();
  if (cost.cols() != n) throw Error("solve_assignment: cost matrix must be square");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr std::ptrdiff_t kNone = -1;

  AssignmentResult result;
  if (n == 0) return result;

  std::vector<double> v(n);
  std::vector<std::ptrdiff_t> x(n, kNone);  // column of row
  std::vector<std::ptrdiff_t> y(n, kNone);  // row of column
  std::vector<std::size_t> matches(n, 0);
  std::vector<std::size_t> free_rows;
  free_rows.reserve(n);

  for (std::size_t jj = n; jj-- > 0;) {
    double best = cost(0, jj);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (cost(i, jj) < best) {
        best = cost(i, jj);
        arg = i;
      }
    }
    v[jj] = best;
    if (++matches[arg] == 1) {
      x[arg] = static_cast<std::ptrdiff_t>(jj);
      y[jj] = static_cast<std::ptrdiff_t>(arg);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (matches[i] == 0) {
      free_rows.push_back(i);
    } else if (matches[i] == 1) {
      const auto j1 = static_cast<std::size_t>(x[i]);
      const double* row = cost.row(i);
      double best = kInf;
      for (std::size_t j = 0; j < n; ++j)
        if (j != j1) best = std::min(best, row[j] - v[j]);
      if (std::isfinite(best)) v[j1] -= best;
    }
  }

  const double scale = std::max(1.0, cost.max_entry());
  const std::size_t step_cap = 8 * n + 64;
  for (int pass = 0; pass < 2 && !free_rows.empty(); ++pass) {
    std::vector<std::size_t> todo;
    todo.swap(free_rows);
    std::size_t k = 0;
    std::size_t steps = 0;
    while (k < todo.size()) {
      const std::size_t i = todo[k++];
      const double* row = cost.row(i);
      double umin = row[0] - v[0];
      std::size_t j1 = 0, j2 = 0;
      double usub = kInf;
      for (std::size_t j = 1; j < n; ++j) {
        const double h = row[j] - v[j];
        if (h < usub) {
          if (h >= umin) {
            usub = h;
            j2 = j;
          } else {
            usub = umin;
            umin = h;
            j2 = j1;
            j1 = j;
          }
        }
      }
      if (n == 1) usub = umin;
      std::ptrdiff_t i0 = y[j1];
      // Tiny gaps count as ties so floating-point price drift cannot bounce a
      // row back and forth; past the step cap rows wait for the
      // shortest-path phase.
      const double gap = usub - umin;
      const bool tie = gap <= 1e-13 * scale;
      if (!tie && ++steps > step_cap) {
        free_rows.push_back(i);
        continue;
      }
      if (!tie) {
        v[j1] -= gap;
      } else if (i0 != kNone) {
        j1 = j2;
        i0 = y[j2];
      }
      x[i] = static_cast<std::ptrdiff_t>(j1);
      y[j1] = static_cast<std::ptrdiff_t>(i);
      if (i0 != kNone) {
        x[static_cast<std::size_t>(i0)] = kNone;
        if (!tie)
          todo[--k] = static_cast<std::size_t>(i0);
        else
          free_rows.push_back(static_cast<std::size_t>(i0));
      }
    }
  }

  std::vector<double> dist(n);
  std::vector<std::size_t> pred(n), cols(n);
  for (std::size_t free_row : free_rows) {
    const double* frow = cost.row(free_row);
    for (std::size_t j = 0; j < n; ++j) {
      dist[j] = frow[j] - v[j];
      pred[j] = free_row;
      cols[j] = j;
    }
    // cols[0, low): scanned; cols[low, up): at the current minimum distance.
    std::size_t low = 0, up = 0, last = 0;
    double dmin = 0.0;
    std::ptrdiff_t end_of_path = kNone;
    while (end_of_path == kNone) {
      if (up == low) {
        last = low;
        dmin = dist[cols[up++]];
        for (std::size_t k = up; k < n; ++k) {
          const std::size_t j = cols[k];
          const double h = dist[j];
          if (h <= dmin) {
            if (h < dmin) {
              up = low;
              dmin = h;
            }
            cols[k] = cols[up];
            cols[up++] = j;
          }
        }
        for (std::size_t k = low; k < up; ++k) {
          if (y[cols[k]] == kNone) {
            end_of_path = static_cast<std::ptrdiff_t>(cols[k]);
            break;
          }
        }
      }
      if (end_of_path != kNone) break;
      const std::size_t j1 = cols[low++];
      const auto i = static_cast<std::size_t>(y[j1]);
      const double* row = cost.row(i);
      const double h = row[j1] - v[j1] - dmin;
      for (std::size_t k = up; k < n; ++k) {
        const std::size_t j = cols[k];
        const double d2 = row[j] - v[j] - h;
        if (d2 < dist[j]) {
          pred[j] = i;
          if (d2 == dmin) {
            if (y[j] == kNone) {
              end_of_path = static_cast<std::ptrdiff_t>(j);
              break;
            }
            cols[k] = cols[up];
            cols[up++] = j;
          }
          dist[j] = d2;
        }
      }
    }
    for (std::size_t k = 0; k < last; ++k) {
      const std::size_t j = cols[k];
      v[j] += dist[j] - dmin;
    }
    for (;;) {
      const std::size_t i = pred[static_cast<std::size_t>(end_of_path)];
      y[static_cast<std::size_t>(end_of_path)] = static_cast<std::ptrdiff_t>(i);
      const std::ptrdiff_t next = x[i];
      x[i] = end_of_path;
      end_of_path = next;
      if (i == free_row) break;
    }
  }

  result.col_of_row.resize(n);
  result.v = std::move(v);
  result.u.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] == kNone) throw Error("solve_assignment: internal error, unassigned row");
    result.col_of_row[i] = static_cast<std::size_t>(x[i]);
    // Row minimum keeps u + v <= c exactly.
    const double* row = cost.row(i);
    double best = kInf;
    for (std::size_t j = 0; j < n; ++j) best = std::min(best, row[j] - result.v[j]);
    result.u[i] = best;
    result.total_cost += row[result.col_of_row[i]];
  }
  return result;
}

}  // namespace otmap
