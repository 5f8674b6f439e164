#include "topdown/rounding.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <utility>

#include "topdown/errors.h"
#include "topdown/min_cost_flow.h"

namespace topdown {

namespace {

using Cost = MinCostFlow::Cost;

constexpr double kCostScale = 1073741824.0;  // 2^30 steps per unit of L1

struct SetNode {
  std::vector<std::int64_t> vars;
  std::int64_t lo, hi;
  int parent = -1;
  int graph_node = -1;
};

// A laminar family of sets built in order of decreasing size; identical sets
// are merged by intersecting their bounds. `deepest` holds the innermost set
// of each variable.
class Forest {
 public:
  explicit Forest(std::int64_t num_vars) : deepest(num_vars, -1) {}

  // Adds `s` unless it crosses a set already present.
  bool TryAdd(SetNode& s) {
    const int p = deepest[s.vars[0]];
    for (std::int64_t v : s.vars) {
      if (deepest[v] != p) return false;
    }
    if (p >= 0 && sets[p].vars.size() == s.vars.size()) {
      sets[p].lo = std::max(sets[p].lo, s.lo);
      sets[p].hi = std::min(sets[p].hi, s.hi);
      if (sets[p].lo > sets[p].hi) {
        throw SolverError("rounding: contradictory bounds on one set");
      }
      return true;
    }
    s.parent = p;
    const int id = static_cast<int>(sets.size());
    for (std::int64_t v : s.vars) deepest[v] = id;
    sets.push_back(std::move(s));
    return true;
  }

  std::vector<SetNode> sets;
  std::vector<int> deepest;
};

RoundingResult LargestRemainder(std::span<const double> x_star,
                                const ConstraintSet& cs,
                                const std::vector<bool>& zero) {
  RoundingResult out;
  out.exact = false;
  const std::int64_t n = cs.num_vars;
  out.x.assign(n, 0);
  for (std::int64_t v = 0; v < n; ++v) {
    if (!zero[v]) out.x[v] = static_cast<std::int64_t>(std::floor(std::max(0.0, x_star[v])));
  }
  for (const auto& c : cs.constraints) {
    std::int64_t value = c.Evaluate(out.x);
    std::int64_t delta = 0;
    if (value < c.lo) delta = c.lo - value;
    if (value > c.hi) delta = c.hi - value;
    if (delta == 0) continue;
    // Adjust the positive-coefficient free variables, largest remainder
    // first when adding and smallest first when removing.
    std::vector<std::pair<double, std::int64_t>> order;
    for (const Term& t : c.terms) {
      if (t.coef == 1 && !zero[t.var]) {
        const double rem = x_star[t.var] - static_cast<double>(out.x[t.var]);
        order.push_back({delta > 0 ? -rem : rem, t.var});
      }
    }
    std::sort(order.begin(), order.end());
    for (std::size_t i = 0; delta != 0 && !order.empty();
         i = (i + 1) % order.size()) {
      std::int64_t& xv = out.x[order[i].second];
      if (delta > 0) {
        ++xv;
        --delta;
      } else if (xv > 0) {
        --xv;
        ++delta;
      } else {
        bool any = false;
        for (auto& o : order) any = any || out.x[o.second] > 0;
        if (!any) break;
      }
    }
  }
  const auto violations = cs.Violations(out.x);
  out.warning = "inexact rounding: constraint structure is not a network; "
                "largest-remainder fallback used (" +
                std::to_string(violations.size()) + " violations remain)";
  return out;
}

}  // namespace

double L1Distance(std::span<const std::int64_t> x,
                  std::span<const double> x_star) {
  double d = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    d += std::abs(static_cast<double>(x[i]) - x_star[i]);
  }
  return d;
}

RoundingResult RoundControlled(std::span<const double> x_star,
                               const ConstraintSet& cs) {
  const std::int64_t n = cs.num_vars;
  const std::vector<bool> zero = PropagateZeros(cs);

  // Parent-child sets go to the sink-side forest; every other set goes to
  // the source side, or to the sink side when it crosses a source-side set.
  std::vector<std::pair<SetNode, bool>> sets;  // (set, parent-child)
  for (const auto& c : cs.constraints) {
    if (!c.all_positive()) return LargestRemainder(x_star, cs, zero);
    SetNode s{{}, c.lo, c.hi};
    for (const Term& t : c.terms) {
      if (!zero[t.var]) s.vars.push_back(t.var);
    }
    if (s.vars.empty()) {
      if (c.lo > 0) throw SolverError("rounding: infeasible " + c.name);
      continue;
    }
    s.lo = std::max<std::int64_t>(s.lo, 0);
    sets.push_back({std::move(s), c.family == ConstraintFamily::kParentChild});
  }
  std::stable_sort(sets.begin(), sets.end(), [](const auto& a, const auto& b) {
    if (a.first.vars.size() != b.first.vars.size()) {
      return a.first.vars.size() > b.first.vars.size();
    }
    return a.second && !b.second;
  });
  Forest fa(n), fb(n);
  for (auto& [s, parent_child] : sets) {
    if (parent_child) {
      if (!fb.TryAdd(s)) return LargestRemainder(x_star, cs, zero);
    } else if (!fa.TryAdd(s) && !fb.TryAdd(s)) {
      return LargestRemainder(x_star, cs, zero);
    }
  }
  auto* forest_a = &fa.sets;
  auto* forest_b = &fb.sets;
  const auto& deep_a = fa.deepest;
  const auto& deep_b = fb.deepest;

  // Node 0 is the source side, node 1 the sink side.
  MinCostFlow flow(2);
  constexpr int kS = 0, kT = 1;
  auto bounded_arc = [&](int from, int to, std::int64_t lo, std::int64_t hi) {
    const std::int64_t cap =
        hi == kNoUpper ? MinCostFlow::kInfinite : hi - lo;
    flow.AddSupply(from, -lo);
    flow.AddSupply(to, lo);
    flow.AddArc(from, to, cap, 0);
  };
  for (auto& s : *forest_a) s.graph_node = flow.AddNode();
  for (auto& s : *forest_b) s.graph_node = flow.AddNode();
  for (auto& s : *forest_a) {
    const int from = s.parent < 0 ? kS : (*forest_a)[s.parent].graph_node;
    bounded_arc(from, s.graph_node, s.lo, s.hi);
  }
  for (auto& s : *forest_b) {
    const int to = s.parent < 0 ? kT : (*forest_b)[s.parent].graph_node;
    bounded_arc(s.graph_node, to, s.lo, s.hi);
  }
  flow.AddArc(kT, kS, MinCostFlow::kInfinite, 0);

  std::vector<std::int64_t> free_vars;
  for (std::int64_t v = 0; v < n; ++v) {
    if (!zero[v]) free_vars.push_back(v);
  }
  const Cost m = static_cast<Cost>(free_vars.size()) *
                     static_cast<Cost>(free_vars.size()) + 1;
  const Cost unit = static_cast<Cost>(kCostScale) * m;
  struct VarArcs {
    std::int64_t base;
    int up, more, down;
  };
  std::vector<VarArcs> arcs(free_vars.size());
  for (std::size_t r = 0; r < free_vars.size(); ++r) {
    const std::int64_t v = free_vars[r];
    const double xs = std::max(0.0, x_star[v]);
    const std::int64_t base = static_cast<std::int64_t>(std::floor(xs));
    const double frac = xs - static_cast<double>(base);
    const int tail = deep_a[v] < 0 ? kS : (*forest_a)[deep_a[v]].graph_node;
    const int head = deep_b[v] < 0 ? kT : (*forest_b)[deep_b[v]].graph_node;
    flow.AddSupply(tail, -base);
    flow.AddSupply(head, base);
    const Cost up_cost =
        static_cast<Cost>(std::llround((1.0 - 2.0 * frac) * kCostScale)) * m +
        static_cast<Cost>(r);
    arcs[r] = {base, flow.AddArc(tail, head, 1, up_cost),
               flow.AddArc(tail, head, MinCostFlow::kInfinite, unit),
               flow.AddArc(head, tail, base, unit)};
  }
  if (!flow.Solve()) return LargestRemainder(x_star, cs, zero);

  RoundingResult out;
  out.x.assign(n, 0);
  for (std::size_t r = 0; r < free_vars.size(); ++r) {
    out.x[free_vars[r]] = arcs[r].base + flow.Flow(arcs[r].up) +
                          flow.Flow(arcs[r].more) - flow.Flow(arcs[r].down);
  }
  return out;
}

RoundingResult RoundStaged(std::span<const double> x_star,
                           const ConstraintSet& cs,
                           const std::vector<bool>& first_stage) {
  const std::int64_t n = cs.num_vars;
  ConstraintSet stage1(n), stage2(n);
  for (std::int64_t v = 0; v < n; ++v) {
    stage1.fixed_zero[v] = cs.fixed_zero[v] || !first_stage[v];
    stage2.fixed_zero[v] = cs.fixed_zero[v] || first_stage[v];
  }
  // Linking constraints normalized to sum(first) - sum(second) in [lo, hi].
  struct Link {
    const LinearConstraint* c;
    std::vector<std::int64_t> first, second;
    std::int64_t lo, hi;
  };
  std::vector<Link> links;
  for (const auto& c : cs.constraints) {
    bool has1 = false, has2 = false;
    for (const Term& t : c.terms) {
      (first_stage[t.var] ? has1 : has2) = true;
    }
    if (!(has1 && has2)) {
      (has2 ? stage2 : stage1).constraints.push_back(c);
      continue;
    }
    const int sign = first_stage[c.terms[0].var] ? c.terms[0].coef
                                                 : -c.terms[0].coef;
    Link link{&c, {}, {}, sign > 0 ? c.lo : -c.hi, sign > 0 ? c.hi : -c.lo};
    if (c.lo == std::numeric_limits<std::int64_t>::min() ||
        c.hi == kNoUpper) {
      return RoundControlled(x_star, cs);  // one-sided links: not staged
    }
    for (const Term& t : c.terms) {
      const int coef = t.coef * sign;
      if (first_stage[t.var] != (coef > 0)) return RoundControlled(x_star, cs);
      (first_stage[t.var] ? link.first : link.second).push_back(t.var);
    }
    links.push_back(std::move(link));
  }
  if (links.empty()) return RoundControlled(x_star, cs);

  // A second-stage set that contains the second sides of some equality links
  // bounds the sum of their first sides.
  for (const auto& t : stage2.constraints) {
    if (!t.all_positive()) continue;
    std::set<std::int64_t> members;
    for (const Term& term : t.terms) members.insert(term.var);
    std::vector<std::int64_t> union_first;
    std::set<std::int64_t> covered;
    bool disjoint = true;
    for (const auto& link : links) {
      if (link.lo != 0 || link.hi != 0 || link.second.empty()) continue;
      const bool inside = std::all_of(
          link.second.begin(), link.second.end(),
          [&](std::int64_t v) { return members.count(v) != 0; });
      if (!inside) continue;
      for (std::int64_t v : link.second) {
        disjoint = disjoint && covered.insert(v).second;
      }
      union_first.insert(union_first.end(), link.first.begin(),
                         link.first.end());
    }
    if (!disjoint || union_first.empty()) continue;
    LinearConstraint derived{ConstraintFamily::kBound, "derived:" + t.name,
                             {}, 0, t.hi};
    std::sort(union_first.begin(), union_first.end());
    union_first.erase(std::unique(union_first.begin(), union_first.end()),
                      union_first.end());
    for (std::int64_t v : union_first) derived.terms.push_back({v, 1});
    if (covered.size() == members.size()) derived.lo = t.lo;
    stage1.constraints.push_back(std::move(derived));
  }

  RoundingResult first = RoundControlled(x_star, stage1);
  for (const auto& link : links) {
    std::int64_t value = 0;
    for (std::int64_t v : link.first) value += first.x[v];
    LinearConstraint fixed{link.c->family, link.c->name, {},
                           std::max<std::int64_t>(0, value - link.hi),
                           value - link.lo};
    for (std::int64_t v : link.second) fixed.terms.push_back({v, 1});
    stage2.constraints.push_back(std::move(fixed));
  }
  RoundingResult second = RoundControlled(x_star, stage2);

  RoundingResult out;
  out.x.assign(n, 0);
  for (std::int64_t v = 0; v < n; ++v) {
    out.x[v] = first_stage[v] ? first.x[v] : second.x[v];
  }
  out.exact = first.exact && second.exact;
  out.warning = first.warning.empty() ? second.warning : first.warning;
  return out;
}

}  // namespace topdown
