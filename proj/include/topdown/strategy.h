#ifndef TOPDOWN_STRATEGY_H_
#define TOPDOWN_STRATEGY_H_

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "topdown/rational.h"
#include "topdown/spine.h"

namespace topdown {

// Per-(level, query) ρ allocations. After the single-child adjustment it also
// holds per-unit overrides and the set of measurement-skipped units.
class StrategyTable {
 public:
  using Key = std::pair<std::string, std::string>;  // (level, query id)

  void Set(const std::string& level, const std::string& query, Rho rho);
  Rho Get(const std::string& level, const std::string& query) const;
  const std::map<Key, Rho>& entries() const { return entries_; }
  // Query ids with at least one entry, ascending.
  std::vector<std::string> QueryIds() const;

  void SetUnitOverride(const std::string& geocode, const std::string& query,
                       Rho rho);
  void MarkSkipped(const std::string& geocode) { skipped_.insert(geocode); }
  bool IsSkipped(const std::string& geocode) const {
    return skipped_.count(geocode) != 0;
  }
  const std::set<std::string>& skipped() const { return skipped_; }
  const std::map<std::string, std::map<std::string, Rho>>& unit_overrides()
      const {
    return overrides_;
  }

  // Positive allocations that apply to `geocode`; empty for skipped units.
  std::map<std::string, Rho> RowFor(const std::string& geocode,
                                    const Spine& spine) const;

 private:
  std::map<Key, Rho> entries_;
  std::map<std::string, std::map<std::string, Rho>> overrides_;
  std::set<std::string> skipped_;
};

// Moves the allocation of every parent with exactly one child onto that child
// (transitively down chains) and marks the parent measurement-skipped.
StrategyTable AdjustSingleChildAllocations(const Spine& spine,
                                           const StrategyTable& table);

}  // namespace topdown

#endif  // TOPDOWN_STRATEGY_H_
