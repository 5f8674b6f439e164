#include "topdown/min_cost_flow.h"

#include <algorithm>
#include <functional>
#include <queue>
#include <utility>

#include "topdown/errors.h"

namespace topdown {

MinCostFlow::MinCostFlow(int nodes) : adj_(nodes), supply_(nodes, 0) {}

int MinCostFlow::AddNode() {
  adj_.emplace_back();
  supply_.push_back(0);
  return static_cast<int>(adj_.size()) - 1;
}

int MinCostFlow::AddArc(int from, int to, std::int64_t capacity, Cost cost) {
  if (capacity < 0) throw SolverError("negative arc capacity");
  if (cost < 0 && capacity >= kInfinite) {
    throw SolverError("negative-cost arc needs a finite capacity");
  }
  const int a = static_cast<int>(adj_[from].size());
  const int b = static_cast<int>(adj_[to].size()) + (from == to ? 1 : 0);
  adj_[from].push_back({to, b, capacity, cost});
  adj_[to].push_back({from, a, 0, -cost});
  arcs_.push_back({from, a});
  arc_cap_.push_back(capacity);
  return static_cast<int>(arcs_.size()) - 1;
}

std::int64_t MinCostFlow::Flow(int arc) const {
  const auto [node, idx] = arcs_[arc];
  return arc_cap_[arc] - adj_[node][idx].cap;
}

MinCostFlow::Cost MinCostFlow::TotalCost() const {
  Cost total = 0;
  for (std::size_t a = 0; a < arcs_.size(); ++a) {
    const auto [node, idx] = arcs_[a];
    total += static_cast<Cost>(Flow(static_cast<int>(a))) * adj_[node][idx].cost;
  }
  return total;
}

bool MinCostFlow::Solve() {
  const int n = node_count();
  std::vector<std::int64_t> excess(n);
  for (int v = 0; v < n; ++v) excess[v] = supply_[v];
  // Saturate negative arcs.
  for (std::size_t a = 0; a < arcs_.size(); ++a) {
    const auto [node, idx] = arcs_[a];
    Edge& e = adj_[node][idx];
    if (e.cost < 0 && e.cap > 0) {
      const std::int64_t f = e.cap;
      e.cap = 0;
      adj_[e.to][e.rev].cap += f;
      excess[node] -= f;
      excess[e.to] += f;
    }
  }
  // Super source feeds nodes with surplus; deficits drain to the super sink.
  const int source = n, sink = n + 1;
  adj_.resize(n + 2);
  std::int64_t need = 0;
  std::vector<std::pair<int, int>> helper;
  for (int v = 0; v < n; ++v) {
    if (excess[v] > 0) {
      const int a = static_cast<int>(adj_[source].size());
      const int b = static_cast<int>(adj_[v].size());
      adj_[source].push_back({v, b, excess[v], 0});
      adj_[v].push_back({source, a, 0, 0});
      need += excess[v];
    } else if (excess[v] < 0) {
      const int a = static_cast<int>(adj_[v].size());
      const int b = static_cast<int>(adj_[sink].size());
      adj_[v].push_back({sink, b, -excess[v], 0});
      adj_[sink].push_back({v, a, 0, 0});
    }
  }

  const int total = n + 2;
  std::vector<Cost> potential(total, 0), dist(total);
  std::vector<int> prev_node(total), prev_edge(total);
  std::vector<char> done(total);
  constexpr Cost kUnreached = static_cast<Cost>(1) << 120;
  using Item = std::pair<Cost, int>;
  bool ok = true;
  while (need > 0) {
    std::fill(dist.begin(), dist.end(), kUnreached);
    std::fill(done.begin(), done.end(), 0);
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
    dist[source] = 0;
    heap.push({0, source});
    while (!heap.empty()) {
      const auto [d, u] = heap.top();
      heap.pop();
      if (done[u]) continue;
      done[u] = 1;
      if (u == sink) break;
      for (int i = 0; i < static_cast<int>(adj_[u].size()); ++i) {
        const Edge& e = adj_[u][i];
        if (e.cap <= 0 || done[e.to]) continue;
        const Cost nd = d + e.cost + potential[u] - potential[e.to];
        if (nd < dist[e.to]) {
          dist[e.to] = nd;
          prev_node[e.to] = u;
          prev_edge[e.to] = i;
          heap.push({nd, e.to});
        }
      }
    }
    if (!done[sink]) {
      ok = false;
      break;
    }
    const Cost dsink = dist[sink];
    for (int v = 0; v < total; ++v) {
      potential[v] += done[v] ? dist[v] : dsink;
    }
    std::int64_t push = need;
    for (int v = sink; v != source; v = prev_node[v]) {
      push = std::min(push, adj_[prev_node[v]][prev_edge[v]].cap);
    }
    for (int v = sink; v != source; v = prev_node[v]) {
      Edge& e = adj_[prev_node[v]][prev_edge[v]];
      e.cap -= push;
      adj_[v][e.rev].cap += push;
    }
    need -= push;
  }
  // Drop the helper arcs; they were appended after every real arc.
  for (int v = 0; v < n; ++v) {
    while (!adj_[v].empty() &&
           (adj_[v].back().to == source || adj_[v].back().to == sink)) {
      adj_[v].pop_back();
    }
  }
  adj_.resize(n);
  return ok;
}

}  // namespace topdown
