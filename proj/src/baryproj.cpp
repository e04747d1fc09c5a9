#include "otmap/baryproj.hpp"

#include <algorithm>
#include <cmath>

namespace otmap {

BarycentricMap barycentric_projection(const TransportPlan& plan) {
  if (!plan.source || !plan.target) throw Error("barycentric_projection: plan without measures");
  const auto& src = *plan.source;
  const auto& tgt = *plan.target;
  const std::size_t d = src.dim();
  BarycentricMap map{plan.source, PointSet(src.size(), d)};
  std::vector<double> row_mass(src.size(), 0.0);
  for (const auto& e : plan.entries) {
    if (e.mass < 0.0) throw Error("barycentric_projection: negative mass in plan");
    row_mass[e.source] += e.mass;
    auto img = map.images[e.source];
    const auto y = tgt.point(e.target);
    for (std::size_t k = 0; k < d; ++k) img[k] += e.mass * y[k];
  }
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!(row_mass[i] > 0.0))
      throw Error("barycentric_projection: source atom " + std::to_string(i) + " carries no mass");
    auto img = map.images[i];
    for (std::size_t k = 0; k < d; ++k) img[k] /= row_mass[i];
  }
  // A single-entry row reproduces its target exactly.
  for (std::size_t a = 0; a < plan.entries.size(); ++a) {
    const auto& e = plan.entries[a];
    const bool alone = (a == 0 || plan.entries[a - 1].source != e.source) &&
                       (a + 1 == plan.entries.size() || plan.entries[a + 1].source != e.source);
    if (alone) std::ranges::copy(tgt.point(e.target), map.images[e.source].begin());
  }
  return map;
}

double map_l2_error(const BarycentricMap& map, const PointMap& t0) {
  const auto& src = *map.source;
  std::vector<double> truth(src.dim());
  std::vector<double> terms(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    t0(src.point(i), truth);
    terms[i] = src.weight(i) * squared_distance(map.images[i], truth);
  }
  return stable_sum(terms);
}

double map_l2_error(const BarycentricMap& map, const SyntheticProblem& problem) {
  return map_l2_error(map, [&](std::span<const double> x, std::span<double> out) {
    problem.transport(x, out);
  });
}

namespace {

// int f d(tgt - nu_bar) with f evaluated at both supports.
template <class F>
double signed_integral(const DiscreteMeasure& tgt, const DiscreteMeasure& bar, F&& f) {
  std::vector<double> terms;
  terms.reserve(tgt.size() + bar.size());
  for (std::size_t j = 0; j < tgt.size(); ++j) terms.push_back(tgt.weight(j) * f(tgt.point(j)));
  for (std::size_t j = 0; j < bar.size(); ++j) terms.push_back(-bar.weight(j) * f(bar.point(j)));
  return stable_sum(terms);
}

// S(psi) = int psi d src + int psi* d nu, psi* the discrete Legendre
// transform over source atoms.
double dual_objective(const DiscreteMeasure& src, const std::vector<double>& psi,
                      const DiscreteMeasure& nu) {
  std::vector<double> terms;
  for (std::size_t i = 0; i < src.size(); ++i) terms.push_back(src.weight(i) * psi[i]);
  for (std::size_t j = 0; j < nu.size(); ++j)
    terms.push_back(nu.weight(j) * discrete_legendre(src.points(), psi, nu.point(j)));
  return stable_sum(terms);
}

}  // namespace

StabilityReport stability_report(const DiscreteMeasure& src, const DiscreteMeasure& tgt,
                                 const SyntheticProblem& problem, const TransportPlan* plan) {
  require_same_dim(src, tgt);
  if (src.dim() != problem.dim())
    throw DimensionMismatch("stability_report: problem dimension differs from the samples");
  const double lip = problem.lipschitz();

  const DiscreteMeasure bar(problem.push_forward(src.points()), src.weights());
  const TransportPlan tilde_plan = solve_ot(src, tgt);
  const TransportPlan bar_plan = solve_ot(src, bar);
  const TransportPlan& used = plan ? *plan : tilde_plan;

  StabilityReport r;
  r.lipschitz = lip;
  const auto map = barycentric_projection(used);
  r.lhs = map_l2_error(map, problem);

  const auto& psi = tilde_plan.duals.psi;
  const auto& psi_bar = bar_plan.duals.psi;
  const double int_tilde = signed_integral(tgt, bar, [&](std::span<const double> y) {
    return discrete_legendre(src.points(), psi, y);
  });
  const double int_bar = signed_integral(tgt, bar, [&](std::span<const double> y) {
    return discrete_legendre(src.points(), psi_bar, y);
  });
  r.max_term = std::max(std::abs(int_tilde), std::abs(int_bar));
  r.phi_integral =
      signed_integral(tgt, bar, [&](std::span<const double> y) { return problem.conjugate(y); });
  r.dual_gap_term = dual_objective(src, psi_bar, bar) - dual_objective(src, psi, tgt);

  r.rhs_max_term = 2.0 * lip * r.max_term;
  r.rhs_phi_term = 2.0 * lip * r.phi_integral;
  r.holds = r.lhs <= r.rhs_max_term + r.rhs_phi_term + kStabilitySlack;
  r.holds_unit_constant = r.lhs <= lip * r.max_term + r.rhs_phi_term + kStabilitySlack;
  r.holds_sharp = r.lhs <= 2.0 * lip * (r.dual_gap_term + r.phi_integral) + kStabilitySlack;

  std::vector<double> jl, jr;
  for (std::size_t i = 0; i < src.size(); ++i)
    jl.push_back(src.weight(i) * problem.conjugate(map.images[i]));
  for (const auto& e : used.entries) jr.push_back(e.mass * problem.conjugate(tgt.point(e.target)));
  r.jensen_lhs = stable_sum(jl);
  r.jensen_rhs = stable_sum(jr);
  return r;
}

}  // namespace otmap
