#pragma once

#include <functional>
#include <memory>
#include <span>

#include "otmap/ot_core.hpp"
#include "otmap/synthetic.hpp"

namespace otmap {

/// Conditional-mean map of a coupling, one image per source atom.
struct BarycentricMap {
  std::shared_ptr<const DiscreteMeasure> source;
  PointSet images;
};

BarycentricMap barycentric_projection(const TransportPlan& plan);

using PointMap = std::function<void(std::span<const double>, std::span<double>)>;

/// sum_i w_i |images[i] - T0(x_i)|^2.
double map_l2_error(const BarycentricMap& map, const PointMap& t0);
double map_l2_error(const BarycentricMap& map, const SyntheticProblem& problem);

/// Both sides of the stability inequality on one instance.
///
/// With nu_bar = T0 # src, psi the optimal potential for (src, tgt) and
/// psi_bar the one for (src, nu_bar), and every integral taken against
/// tgt - nu_bar:
///   lhs           = sum_i w_i |T_hat(x_i) - T0(x_i)|^2
///   max_term      = max(|int psi*|, |int psi_bar*|)
///   phi_integral  = int phi0*
///   rhs_max_term  = 2 L max_term
///   rhs_phi_term  = 2 L phi_integral
/// The dual gap term S(src, nu_bar; psi_bar) - S(src, tgt; psi) is bracketed
/// by -max_term and max_term, which is where the factor 2L in front of
/// max_term comes from.
struct StabilityReport {
  double lhs = 0.0;
  double rhs_max_term = 0.0;
  double rhs_phi_term = 0.0;
  bool holds = false;

  double lipschitz = 0.0;
  double max_term = 0.0;
  double phi_integral = 0.0;
  double dual_gap_term = 0.0;
  /// lhs <= L max_term + rhs_phi_term + 1e-7 (the tighter constant on the max term).
  bool holds_unit_constant = false;
  /// lhs <= 2L (dual_gap_term + phi_integral) + 1e-7, the bound before bracketing.
  bool holds_sharp = false;
  /// int phi0*(T_hat(x)) d src <= int int phi0*(y) d gamma(y|x) d src.
  double jensen_lhs = 0.0;
  double jensen_rhs = 0.0;
};

inline constexpr double kStabilitySlack = 1e-7;

/// Evaluates the inequality at the optimal plan for (src, tgt), or at `plan`
/// when given (which need not be optimal).
StabilityReport stability_report(const DiscreteMeasure& src, const DiscreteMeasure& tgt,
                                 const SyntheticProblem& problem,
                                 const TransportPlan* plan = nullptr);

}  // namespace otmap
