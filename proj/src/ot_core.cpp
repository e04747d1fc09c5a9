#include "otmap/ot_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "otmap/assignment.hpp"
#include "otmap/network_simplex.hpp"

namespace otmap {

double CostMatrix::max_entry() const {
  double m = 0.0;
  for (double c : data_) m = std::max(m, c);
  return m;
}

CostMatrix cost_matrix(const DiscreteMeasure& src, const DiscreteMeasure& tgt) {
  require_same_dim(src, tgt);
  CostMatrix c(src.size(), tgt.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto x = src.point(i);
    for (std::size_t j = 0; j < tgt.size(); ++j) c(i, j) = squared_distance(x, tgt.point(j));
  }
  return c;
}

double TransportPlan::recomputed_cost() const {
  double c = 0.0;
  for (const auto& e : entries)
    c += e.mass * squared_distance(source->point(e.source), target->point(e.target));
  return c;
}

double discrete_legendre(const PointSet& atoms, const std::vector<double>& values,
                         std::span<const double> y) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < atoms.size(); ++i) best = std::max(best, dot(atoms[i], y) - values[i]);
  return best;
}

namespace {

// Converts LP duals of the squared-distance problem into convex potentials,
// polishes them by a pair of discrete Legendre transforms and pins psi[0] = 0.
DualPotentials potentials_from_lp(const DiscreteMeasure& src, const DiscreteMeasure& tgt,
                                  const std::vector<double>& u) {
  DualPotentials d;
  d.psi.resize(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) d.psi[i] = 0.5 * (squared_norm(src.point(i)) - u[i]);
  d.psi_star.resize(tgt.size());
  for (std::size_t j = 0; j < tgt.size(); ++j)
    d.psi_star[j] = discrete_legendre(src.points(), d.psi, tgt.point(j));
  for (std::size_t i = 0; i < src.size(); ++i)
    d.psi[i] = discrete_legendre(tgt.points(), d.psi_star, src.point(i));
  const double shift = d.psi[0];
  for (double& p : d.psi) p -= shift;
  for (double& p : d.psi_star) p += shift;
  return d;
}

TransportPlan make_plan(const DiscreteMeasure& src, const DiscreteMeasure& tgt,
                        std::vector<PlanEntry> entries, const std::vector<double>& u) {
  TransportPlan plan;
  plan.source = std::make_shared<const DiscreteMeasure>(src);
  plan.target = std::make_shared<const DiscreteMeasure>(tgt);
  plan.entries = std::move(entries);
  plan.cost = plan.recomputed_cost();
  plan.duals = potentials_from_lp(src, tgt, u);
  return plan;
}

}  // namespace

namespace {

// (x - mean) / rms, with the mean and rms spread of the cloud.
PointSet standardized(const DiscreteMeasure& m, std::vector<double>& mean, double& rms) {
  mean = m.mean();
  PointSet out = m.points();
  double spread = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto p = out[i];
    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= mean[k];
    spread += m.weight(i) * squared_norm(p);
  }
  rms = spread > 0.0 ? std::sqrt(spread) : 1.0;
  for (double& c : out.coords()) c /= rms;
  return out;
}

// North-west corner rule on sorted atoms. The cost -x y is Monge on sorted
// data, so the staircase is optimal and the potentials read off along it are
// dual feasible.
TransportPlan monotone_plan(const DiscreteMeasure& src, const DiscreteMeasure& tgt) {
  const std::size_t m = src.size(), n = tgt.size();
  auto order_of = [](const DiscreteMeasure& mu) {
    std::vector<std::size_t> idx(mu.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return mu.point(a)[0] < mu.point(b)[0]; });
    return idx;
  };
  const auto ix = order_of(src), iy = order_of(tgt);
  auto cumulative = [](const DiscreteMeasure& mu, const std::vector<std::size_t>& idx) {
    std::vector<double> c(idx.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) c[k] = acc += mu.weight(idx[k]);
    c.back() = 1.0;
    return c;
  };
  const auto a = cumulative(src, ix), b = cumulative(tgt, iy);
  auto x = [&](std::size_t i) { return src.point(ix[i])[0]; };
  auto y = [&](std::size_t j) { return tgt.point(iy[j])[0]; };

  std::vector<PlanEntry> entries;
  std::vector<double> psi(m, 0.0), psi_star(n, 0.0);
  std::size_t i = 0, j = 0;
  psi_star[0] = x(0) * y(0);
  while (true) {
    const double lo = std::max(i ? a[i - 1] : 0.0, j ? b[j - 1] : 0.0);
    const double mass = std::min(a[i], b[j]) - lo;
    if (mass > 0.0) entries.push_back(PlanEntry{ix[i], iy[j], mass});
    if (i + 1 == m && j + 1 == n) break;
    if (j + 1 == n || (i + 1 < m && a[i] <= b[j])) {
      ++i;
      psi[i] = x(i) * y(j) - psi_star[j];
    } else {
      ++j;
      psi_star[j] = x(i) * y(j) - psi[i];
    }
  }
  std::sort(entries.begin(), entries.end(), [](const PlanEntry& p, const PlanEntry& q) {
    return p.source != q.source ? p.source < q.source : p.target < q.target;
  });
  std::vector<double> u(m);
  for (std::size_t k = 0; k < m; ++k) u[ix[k]] = x(k) * x(k) - 2.0 * psi[k];
  return make_plan(src, tgt, std::move(entries), u);
}

}  // namespace

TransportPlan solve_ot(const DiscreteMeasure& src, const DiscreteMeasure& tgt,
                       const SolveOptions& options) {
  require_same_dim(src, tgt);
  TransportPlan plan;
  if (options.allow_monotone && src.dim() == 1) {
    plan = monotone_plan(src, tgt);
  } else if (options.allow_assignment && src.size() == tgt.size() && src.has_uniform_weights() &&
      tgt.has_uniform_weights()) {
    // Translating or positively rescaling either cloud only adds row and
    // column constants to the cost, so the assignment is solved on
    // standardized clouds, which gives the warm start far better column
    // minima when the clouds are offset. Potentials map back exactly:
    // psi(x) = sx sy psi'(x') + <x, my> up to a constant.
    std::vector<double> mx, my;
    double sx = 1.0, sy = 1.0;
    const PointSet xs = standardized(src, mx, sx);
    const PointSet ys = standardized(tgt, my, sy);
    CostMatrix c(src.size(), tgt.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
      for (std::size_t j = 0; j < ys.size(); ++j) c(i, j) = squared_distance(xs[i], ys[j]);
    const AssignmentResult a = solve_assignment(c);
    std::vector<PlanEntry> entries;
    entries.reserve(src.size());
    std::vector<double> u(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
      entries.push_back(PlanEntry{i, a.col_of_row[i], src.weight(i)});
      const double psi_std = 0.5 * (squared_norm(xs[i]) - a.u[i]);
      const double psi = sx * sy * psi_std + dot(src.point(i), my);
      u[i] = squared_norm(src.point(i)) - 2.0 * psi;
    }
    plan = make_plan(src, tgt, std::move(entries), u);
  } else {
    const CostMatrix c = cost_matrix(src, tgt);
    TransportSolution s = solve_transport(c, src.weights(), tgt.weights());
    plan = make_plan(src, tgt, std::move(s.entries), s.u);
  }
  if (options.verify) verify_plan(plan);
  return plan;
}

double w2_squared(const DiscreteMeasure& src, const DiscreteMeasure& tgt) {
  return solve_ot(src, tgt).cost;
}

namespace {

constexpr std::size_t kMaxPermutationAtoms = 6;
constexpr std::size_t kMaxVertexAtoms = 5;

// Optimal LP duals for a known optimal support: shortest-path potentials in
// the residual graph (forward arcs i->j cost c_ij, reverse arcs on the support
// cost -c_ij). Optimality of the support rules out negative cycles.
void duals_from_support(const CostMatrix& c, const std::vector<PlanEntry>& support,
                        std::vector<double>& u, std::vector<double>& v) {
  const std::size_t m = c.rows(), n = c.cols();
  std::vector<double> pi(m + n, 0.0);
  for (std::size_t round = 0; round < m + n + 1; ++round) {
    bool changed = false;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (pi[i] + c(i, j) < pi[m + j] - 1e-15) {
          pi[m + j] = pi[i] + c(i, j);
          changed = true;
        }
    for (const auto& e : support)
      if (pi[m + e.target] - c(e.source, e.target) < pi[e.source] - 1e-15) {
        pi[e.source] = pi[m + e.target] - c(e.source, e.target);
        changed = true;
      }
    if (!changed) break;
  }
  u.resize(m);
  v.resize(n);
  for (std::size_t i = 0; i < m; ++i) u[i] = -pi[i];
  for (std::size_t j = 0; j < n; ++j) v[j] = pi[m + j];
}

struct TreeSearch {
  const CostMatrix& c;
  const std::vector<double>& a;
  const std::vector<double>& b;
  std::size_t m, n;
  std::vector<std::size_t> chosen;
  std::vector<int> dsu_parent;
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<PlanEntry> best;

  int find(int x) const {
    while (dsu_parent[x] != x) x = dsu_parent[x];
    return x;
  }

  void evaluate() {
    // Leaf elimination recovers the unique flow on the spanning tree.
    const std::size_t nodes = m + n;
    std::vector<double> residual(nodes);
    for (std::size_t i = 0; i < m; ++i) residual[i] = a[i];
    for (std::size_t j = 0; j < n; ++j) residual[m + j] = b[j];
    std::vector<int> degree(nodes, 0);
    std::vector<char> done(chosen.size(), 0);
    for (auto cell : chosen) {
      ++degree[cell / n];
      ++degree[m + cell % n];
    }
    std::vector<double> flow(chosen.size(), 0.0);
    for (std::size_t step = 0; step < chosen.size(); ++step) {
      std::size_t pick = chosen.size();
      int leaf = -1;
      for (std::size_t k = 0; k < chosen.size() && pick == chosen.size(); ++k) {
        if (done[k]) continue;
        const int r = static_cast<int>(chosen[k] / n);
        const int col = static_cast<int>(m + chosen[k] % n);
        if (degree[r] == 1) {
          pick = k;
          leaf = r;
        } else if (degree[col] == 1) {
          pick = k;
          leaf = col;
        }
      }
      const int r = static_cast<int>(chosen[pick] / n);
      const int col = static_cast<int>(m + chosen[pick] % n);
      const int other = leaf == r ? col : r;
      flow[pick] = residual[leaf];
      residual[other] -= residual[leaf];
      residual[leaf] = 0.0;
      --degree[r];
      --degree[col];
      done[pick] = 1;
    }
    double total = 0.0;
    for (std::size_t k = 0; k < chosen.size(); ++k) {
      if (flow[k] < -1e-12) return;
      total += std::max(flow[k], 0.0) * c.data()[chosen[k]];
    }
    if (total < best_cost - 1e-15) {
      best_cost = total;
      best.clear();
      for (std::size_t k = 0; k < chosen.size(); ++k)
        if (flow[k] > 1e-15)
          best.push_back(PlanEntry{chosen[k] / n, chosen[k] % n, flow[k]});
    }
  }

  void recurse(std::size_t cell) {
    const std::size_t need = m + n - 1;
    if (chosen.size() == need) {
      evaluate();
      return;
    }
    if (m * n - cell < need - chosen.size()) return;
    const int r = find(static_cast<int>(cell / n));
    const int col = find(static_cast<int>(m + cell % n));
    if (r != col) {
      dsu_parent[r] = col;
      chosen.push_back(cell);
      recurse(cell + 1);
      chosen.pop_back();
      dsu_parent[r] = r;
    }
    recurse(cell + 1);
  }
};

}  // namespace

TransportPlan brute_force_ot(const DiscreteMeasure& src, const DiscreteMeasure& tgt) {
  require_same_dim(src, tgt);
  const std::size_t m = src.size(), n = tgt.size();
  const CostMatrix c = cost_matrix(src, tgt);
  std::vector<PlanEntry> entries;
  if (m == n && m <= kMaxPermutationAtoms && src.has_uniform_weights() && tgt.has_uniform_weights()) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best_perm;
    do {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += c(i, perm[i]);
      if (total < best) {
        best = total;
        best_perm = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    for (std::size_t i = 0; i < n; ++i) entries.push_back(PlanEntry{i, best_perm[i], src.weight(i)});
  } else if (m <= kMaxVertexAtoms && n <= kMaxVertexAtoms) {
    TreeSearch search{c, src.weights(), tgt.weights(), m, n, {}, {}, std::numeric_limits<double>::infinity(), {}};
    search.dsu_parent.resize(m + n);
    std::iota(search.dsu_parent.begin(), search.dsu_parent.end(), 0);
    search.recurse(0);
    entries = std::move(search.best);
  } else {
    throw Error("brute_force_ot: instance too large (" + std::to_string(m) + "x" +
                std::to_string(n) + ")");
  }
  std::sort(entries.begin(), entries.end(), [](const PlanEntry& x, const PlanEntry& y) {
    return x.source != y.source ? x.source < y.source : x.target < y.target;
  });
  std::vector<double> u, v;
  duals_from_support(c, entries, u, v);
  return make_plan(src, tgt, std::move(entries), u);
}

PlanDiagnostics diagnose(const TransportPlan& plan) {
  const DiscreteMeasure& src = *plan.source;
  const DiscreteMeasure& tgt = *plan.target;
  PlanDiagnostics d;
  std::vector<double> rows(src.size(), 0.0), cols(tgt.size(), 0.0);
  d.min_mass = std::numeric_limits<double>::infinity();
  for (const auto& e : plan.entries) {
    rows[e.source] += e.mass;
    cols[e.target] += e.mass;
    d.min_mass = std::min(d.min_mass, e.mass);
  }
  for (std::size_t i = 0; i < src.size(); ++i)
    d.max_marginal_error = std::max(d.max_marginal_error, std::abs(rows[i] - src.weight(i)));
  for (std::size_t j = 0; j < tgt.size(); ++j)
    d.max_marginal_error = std::max(d.max_marginal_error, std::abs(cols[j] - tgt.weight(j)));
  d.cost_error = std::abs(plan.cost - plan.recomputed_cost());

  const auto& psi = plan.duals.psi;
  const auto& psi_star = plan.duals.psi_star;
  for (std::size_t i = 0; i < src.size(); ++i)
    for (std::size_t j = 0; j < tgt.size(); ++j)
      d.max_dual_violation =
          std::max(d.max_dual_violation, dot(src.point(i), tgt.point(j)) - psi[i] - psi_star[j]);
  for (const auto& e : plan.entries)
    d.max_slackness_gap = std::max(
        d.max_slackness_gap,
        std::abs(psi[e.source] + psi_star[e.target] - dot(src.point(e.source), tgt.point(e.target))));
  double dual_value = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) dual_value += src.weight(i) * psi[i];
  for (std::size_t j = 0; j < tgt.size(); ++j) dual_value += tgt.weight(j) * psi_star[j];
  const double primal = 0.5 * src.second_moment() + 0.5 * tgt.second_moment() - dual_value;
  d.duality_gap = std::abs(primal - 0.5 * plan.cost);
  return d;
}

void verify_plan(const TransportPlan& plan, double feasibility_tol, double gap_tol) {
  const PlanDiagnostics d = diagnose(plan);
  std::string problems;
  if (d.max_marginal_error > feasibility_tol)
    problems += " marginal error " + std::to_string(d.max_marginal_error) + ";";
  if (d.min_mass < 0.0) problems += " negative mass;";
  if (d.cost_error > feasibility_tol) problems += " cost mismatch;";
  if (d.max_dual_violation > feasibility_tol)
    problems += " dual infeasible by " + std::to_string(d.max_dual_violation) + ";";
  if (d.max_slackness_gap > feasibility_tol)
    problems += " slackness gap " + std::to_string(d.max_slackness_gap) + ";";
  if (d.duality_gap > gap_tol) problems += " duality gap " + std::to_string(d.duality_gap) + ";";
  if (!problems.empty()) throw Error("transport plan failed verification:" + problems);
}

}  // namespace otmap
