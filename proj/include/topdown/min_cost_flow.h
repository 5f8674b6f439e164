#ifndef TOPDOWN_MIN_COST_FLOW_H_
#define TOPDOWN_MIN_COST_FLOW_H_

#include <cstdint>
#include <limits>
#include <vector>

namespace topdown {

// Min-cost flow with node supplies by successive shortest paths (Dijkstra
// with potentials). Negative-cost arcs must have finite capacity; they are
// saturated up front so every residual cost starts nonnegative. Costs are
// 128-bit so callers can pack a tie-breaking rank below the real cost.
class MinCostFlow {
 public:
  using Cost = __int128;
  static constexpr std::int64_t kInfinite =
      std::numeric_limits<std::int64_t>::max() / 4;

  explicit MinCostFlow(int nodes);

  int AddNode();
  int AddArc(int from, int to, std::int64_t capacity, Cost cost);
  // Net amount that must leave `node`; supplies must sum to zero.
  void AddSupply(int node, std::int64_t amount) { supply_[node] += amount; }

  // False when the supplies cannot be routed.
  bool Solve();

  std::int64_t Flow(int arc) const;
  Cost TotalCost() const;
  int node_count() const { return static_cast<int>(adj_.size()); }

 private:
  struct Edge {
    int to;
    int rev;  // index of the paired edge in adj_[to]
    std::int64_t cap;
    Cost cost;
  };

  std::vector<std::vector<Edge>> adj_;
  std::vector<std::int64_t> supply_;
  std::vector<std::pair<int, int>> arcs_;  // (node, index in adj_[node])
  std::vector<std::int64_t> arc_cap_;
};

}  // namespace topdown

#endif  // TOPDOWN_MIN_COST_FLOW_H_
