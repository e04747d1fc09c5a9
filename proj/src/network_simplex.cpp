#include "otmap/network_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace otmap {
namespace {

constexpr double kUnitScale = 281474976710656.0;  // 2^48
constexpr std::int64_t kInfFlow = std::numeric_limits<std::int64_t>::max();

std::vector<std::int64_t> to_units(std::span<const double> mass) {
  std::vector<std::int64_t> units(mass.size());
  for (std::size_t i = 0; i < mass.size(); ++i) {
    units[i] = std::llround(mass[i] * kUnitScale);
    if (units[i] <= 0) throw Error("solve_transport: mass below representable resolution");
  }
  return units;
}

void remove_neighbor(std::vector<int>& list, int node) {
  auto it = std::find(list.begin(), list.end(), node);
  *it = list.back();
  list.pop_back();
}

class NetworkSimplex {
 public:
  NetworkSimplex(const CostMatrix& cost, std::vector<std::int64_t> supply,
                 std::vector<std::int64_t> demand)
      : cost_(cost),
        m_(static_cast<int>(cost.rows())),
        n_(static_cast<int>(cost.cols())),
        root_(m_ + n_),
        node_count_(m_ + n_ + 1),
        arc_count_(static_cast<std::int64_t>(m_) * n_) {
    art_cost_ = (cost.max_entry() + 1.0) * node_count_;
    eps_ = 1e-12 * (cost.max_entry() + 1.0) * std::max(1.0, std::log2(node_count_));
    parent_.assign(node_count_, -1);
    pred_arc_.assign(node_count_, -1);
    pred_up_.assign(node_count_, 0);
    flow_.assign(node_count_, 0);
    depth_.assign(node_count_, 0);
    pi_.assign(node_count_, 0.0);
    adj_.assign(node_count_, {});
    for (int u = 0; u < root_; ++u) {
      parent_[u] = root_;
      pred_arc_[u] = arc_count_ + u;
      depth_[u] = 1;
      adj_[u].push_back(root_);
      adj_[root_].push_back(u);
      if (u < m_) {
        pred_up_[u] = 1;
        flow_[u] = supply[u];
        pi_[u] = 0.0;
      } else {
        pred_up_[u] = 0;
        flow_[u] = demand[u - m_];
        pi_[u] = art_cost_;
      }
    }
    block_ = std::max<std::int64_t>(10, static_cast<std::int64_t>(std::sqrt(double(arc_count_))));
  }

  std::size_t run() {
    std::size_t pivots = 0;
    std::size_t since_refresh = 0;
    for (;;) {
      std::int64_t entering = find_entering();
      if (entering < 0) {
        // Re-derive potentials from the tree to shed accumulated rounding and
        // confirm optimality with a full pricing pass.
        refresh_potentials();
        since_refresh = 0;
        entering = find_entering();
        if (entering < 0) break;
      }
      pivot(entering);
      ++pivots;
      if (++since_refresh >= static_cast<std::size_t>(node_count_)) {
        refresh_potentials();
        since_refresh = 0;
      }
    }
    return pivots;
  }

  TransportSolution solution() const {
    TransportSolution out;
    out.u.resize(m_);
    out.v.resize(n_);
    for (int i = 0; i < m_; ++i) out.u[i] = -pi_[i];
    for (int j = 0; j < n_; ++j) out.v[j] = pi_[m_ + j];
    for (int u = 0; u < root_; ++u) {
      if (flow_[u] == 0) continue;
      const std::int64_t arc = pred_arc_[u];
      if (arc >= arc_count_)
        throw Error("solve_transport: artificial arc carries flow (unbalanced input?)");
      out.entries.push_back(PlanEntry{static_cast<std::size_t>(arc / n_),
                                      static_cast<std::size_t>(arc % n_),
                                      static_cast<double>(flow_[u]) / kUnitScale});
    }
    std::sort(out.entries.begin(), out.entries.end(), [](const PlanEntry& a, const PlanEntry& b) {
      return a.source != b.source ? a.source < b.source : a.target < b.target;
    });
    return out;
  }

 private:
  double arc_cost(std::int64_t arc) const {
    if (arc < arc_count_) return cost_.data()[static_cast<std::size_t>(arc)];
    return (arc - arc_count_) < m_ ? 0.0 : art_cost_;
  }

  double reduced_cost(std::int64_t arc) const {
    const int i = static_cast<int>(arc / n_);
    const int j = m_ + static_cast<int>(arc % n_);
    return cost_.data()[static_cast<std::size_t>(arc)] + pi_[i] - pi_[j];
  }

  // Block search pricing: scan arcs cyclically, return the most negative
  // reduced cost of the first block that has one.
  std::int64_t find_entering() {
    double best = -eps_;
    std::int64_t best_arc = -1;
    std::int64_t scanned_in_block = 0;
    for (std::int64_t k = 0; k < arc_count_; ++k) {
      const std::int64_t arc = next_arc_;
      if (++next_arc_ == arc_count_) next_arc_ = 0;
      const double rc = reduced_cost(arc);
      if (rc < best) {
        best = rc;
        best_arc = arc;
      }
      if (++scanned_in_block == block_) {
        if (best_arc >= 0) return best_arc;
        scanned_in_block = 0;
      }
    }
    return best_arc;
  }

  void pivot(std::int64_t arc) {
    const int first = static_cast<int>(arc / n_);
    const int second = m_ + static_cast<int>(arc % n_);
    const double rc = reduced_cost(arc);

    int a = first, b = second;
    while (a != b) {
      if (depth_[a] > depth_[b]) {
        a = parent_[a];
      } else if (depth_[b] > depth_[a]) {
        b = parent_[b];
      } else {
        a = parent_[a];
        b = parent_[b];
      }
    }
    const int join = a;

    // Cycle orientation: join -> first -> (entering arc) -> second -> join.
    // Ties keep the last blocking arc in that orientation.
    std::int64_t delta = kInfFlow;
    int u_out = -1;
    bool out_on_first = true;
    for (int u = first; u != join; u = parent_[u]) {
      const std::int64_t d = pred_up_[u] ? flow_[u] : kInfFlow;
      if (d < delta) {
        delta = d;
        u_out = u;
        out_on_first = true;
      }
    }
    for (int u = second; u != join; u = parent_[u]) {
      const std::int64_t d = pred_up_[u] ? kInfFlow : flow_[u];
      if (d <= delta) {
        delta = d;
        u_out = u;
        out_on_first = false;
      }
    }
    if (u_out < 0 || delta == kInfFlow) throw Error("solve_transport: unbounded cycle");

    if (delta > 0) {
      for (int u = first; u != join; u = parent_[u]) flow_[u] += pred_up_[u] ? -delta : delta;
      for (int u = second; u != join; u = parent_[u]) flow_[u] += pred_up_[u] ? delta : -delta;
    }

    const int in_node = out_on_first ? first : second;
    const int out_node = out_on_first ? second : first;

    remove_neighbor(adj_[u_out], parent_[u_out]);
    remove_neighbor(adj_[parent_[u_out]], u_out);

    path_.clear();
    for (int u = in_node; u != u_out; u = parent_[u]) path_.push_back(u);
    path_.push_back(u_out);
    for (std::size_t t = path_.size() - 1; t >= 1; --t) {
      const int pt = path_[t];
      const int prev = path_[t - 1];
      pred_arc_[pt] = pred_arc_[prev];
      flow_[pt] = flow_[prev];
      pred_up_[pt] = !pred_up_[prev];
      parent_[pt] = prev;
    }
    parent_[in_node] = out_node;
    pred_arc_[in_node] = arc;
    flow_[in_node] = delta;
    pred_up_[in_node] = (in_node == first) ? 1 : 0;
    adj_[in_node].push_back(out_node);
    adj_[out_node].push_back(in_node);

    const double shift = (in_node == second) ? rc : -rc;
    queue_.clear();
    queue_.push_back(in_node);
    for (std::size_t q = 0; q < queue_.size(); ++q) {
      const int u = queue_[q];
      pi_[u] += shift;
      depth_[u] = depth_[parent_[u]] + 1;
      for (int w : adj_[u]) {
        if (w == parent_[u]) continue;
        queue_.push_back(w);
      }
    }
  }

  void refresh_potentials() {
    queue_.clear();
    queue_.push_back(root_);
    pi_[root_] = 0.0;
    depth_[root_] = 0;
    for (std::size_t q = 0; q < queue_.size(); ++q) {
      const int u = queue_[q];
      for (int w : adj_[u]) {
        if (w == parent_[u]) continue;
        const double c = arc_cost(pred_arc_[w]);
        pi_[w] = pred_up_[w] ? pi_[u] - c : pi_[u] + c;
        depth_[w] = depth_[u] + 1;
        queue_.push_back(w);
      }
    }
  }

  const CostMatrix& cost_;
  int m_, n_, root_, node_count_;
  std::int64_t arc_count_;
  double art_cost_ = 0.0;
  double eps_ = 0.0;
  std::int64_t block_ = 10;
  std::int64_t next_arc_ = 0;

  std::vector<int> parent_;
  std::vector<std::int64_t> pred_arc_;
  std::vector<char> pred_up_;
  std::vector<std::int64_t> flow_;
  std::vector<int> depth_;
  std::vector<double> pi_;
  std::vector<std::vector<int>> adj_;
  std::vector<int> path_;
  std::vector<int> queue_;
};

}  // namespace

TransportSolution solve_transport(const CostMatrix& cost, std::span<const double> supply,
                                  std::span<const double> demand) {
  if (supply.size() != cost.rows() || demand.size() != cost.cols())
    throw DimensionMismatch("solve_transport: marginal sizes do not match the cost matrix");
  if (cost.rows() == 0 || cost.cols() == 0) throw Error("solve_transport: empty problem");

  auto a = to_units(supply);
  auto b = to_units(demand);
  std::int64_t sum_a = 0, sum_b = 0;
  for (auto x : a) sum_a += x;
  for (auto x : b) sum_b += x;
  const std::int64_t diff = sum_a - sum_b;
  if (std::abs(static_cast<double>(diff)) > 1e-6 * kUnitScale)
    throw Error("solve_transport: supply and demand totals differ");
  if (diff > 0) {
    *std::max_element(b.begin(), b.end()) += diff;
  } else if (diff < 0) {
    *std::max_element(a.begin(), a.end()) -= diff;
  }

  NetworkSimplex solver(cost, std::move(a), std::move(b));
  const std::size_t pivots = solver.run();
  TransportSolution out = solver.solution();
  out.pivots = pivots;
  return out;
}

}  // namespace otmap
