#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "otmap/measure.hpp"

namespace otmap {

/// Dense row-major matrix of transport costs.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }
  const std::vector<double>& data() const noexcept { return data_; }
  double max_entry() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// C[i][j] = |x_i - y_j|^2.
CostMatrix cost_matrix(const DiscreteMeasure& src, const DiscreteMeasure& tgt);

struct PlanEntry {
  std::size_t source;
  std::size_t target;
  double mass;
};

/// Convex potential values at the atoms.
///
/// psi[i] is the potential at source atom i and psi_star[j] its Legendre dual at
/// target atom j, so psi[i] + psi_star[j] >= <x_i, y_j> with equality on the
/// support of the optimal plan. Normalised so that psi[0] == 0.
struct DualPotentials {
  std::vector<double> psi;
  std::vector<double> psi_star;
};

/// Sparse coupling between two discrete measures.
struct TransportPlan {
  std::shared_ptr<const DiscreteMeasure> source;
  std::shared_ptr<const DiscreteMeasure> target;
  std::vector<PlanEntry> entries;  // sorted by (source, target)
  double cost = 0.0;
  DualPotentials duals;

  /// Recomputes sum mass * |x_i - y_j|^2 from the entries.
  double recomputed_cost() const;
};

struct SolveOptions {
  /// Check marginals, dual feasibility, complementary slackness and the duality
  /// gap after solving; throws on violation.
  bool verify = false;
  /// Use the assignment solver when both sides are equal-size with uniform weights.
  bool allow_assignment = true;
  /// In one dimension, use the monotone (sorted) coupling.
  bool allow_monotone = true;
};

/// Exact optimal transport for squared Euclidean cost.
TransportPlan solve_ot(const DiscreteMeasure& src, const DiscreteMeasure& tgt,
                       const SolveOptions& options = {});

/// Exhaustive-search oracle for tiny instances.
///
/// Equal-size uniform instances with at most 6 atoms enumerate permutations;
/// otherwise both sides must have at most 5 atoms and every spanning-tree basis
/// of the transportation polytope is enumerated.
TransportPlan brute_force_ot(const DiscreteMeasure& src, const DiscreteMeasure& tgt);

double w2_squared(const DiscreteMeasure& src, const DiscreteMeasure& tgt);

/// Discrete Legendre transform over a set of atoms:
/// f*(y) = max_i <x_i, y> - f(x_i).
double discrete_legendre(const PointSet& atoms, const std::vector<double>& values,
                         std::span<const double> y);

struct PlanDiagnostics {
  double max_marginal_error = 0.0;
  double min_mass = 0.0;
  double cost_error = 0.0;
  double max_dual_violation = 0.0;  // max over (i,j) of <x_i,y_j> - psi_i - psi*_j
  double max_slackness_gap = 0.0;   // max over support of |psi_i + psi*_j - <x_i,y_j>|
  double duality_gap = 0.0;         // |primal - dual - cost/2|
};

PlanDiagnostics diagnose(const TransportPlan& plan);

/// Throws Error when any diagnostic exceeds the tolerances (1e-9 feasibility,
/// 1e-7 duality gap).
void verify_plan(const TransportPlan& plan, double feasibility_tol = 1e-9,
                 double gap_tol = 1e-7);

}  // namespace otmap
