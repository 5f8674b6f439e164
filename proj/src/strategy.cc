#include "topdown/strategy.h"

#include <deque>

#include "topdown/errors.h"

namespace topdown {

void StrategyTable::Set(const std::string& level, const std::string& query,
                        Rho rho) {
  if (rho < 0) {
    throw ValidationError("negative rho for (" + level + ", " + query + ")");
  }
  entries_[{level, query}] = std::move(rho);
}

Rho StrategyTable::Get(const std::string& level,
                       const std::string& query) const {
  auto it = entries_.find({level, query});
  return it == entries_.end() ? Rho(0) : it->second;
}

std::vector<std::string> StrategyTable::QueryIds() const {
  std::set<std::string> ids;
  for (const auto& [k, v] : entries_) ids.insert(k.second);
  return {ids.begin(), ids.end()};
}

void StrategyTable::SetUnitOverride(const std::string& geocode,
                                    const std::string& query, Rho rho) {
  overrides_[geocode][query] = std::move(rho);
}

std::map<std::string, Rho> StrategyTable::RowFor(const std::string& geocode,
                                                 const Spine& spine) const {
  std::map<std::string, Rho> row;
  if (IsSkipped(geocode)) return row;
  auto ov = overrides_.find(geocode);
  if (ov != overrides_.end()) {
    for (const auto& [q, rho] : ov->second) {
      if (rho > 0) row[q] = rho;
    }
    return row;
  }
  const std::string& level = spine.level_name(spine.unit(geocode).level);
  for (const auto& [k, rho] : entries_) {
    if (k.first == level && rho > 0) row[k.second] = rho;
  }
  return row;
}

StrategyTable AdjustSingleChildAllocations(const Spine& spine,
                                           const StrategyTable& table) {
  StrategyTable out = table;
  // Allocation inherited from skipped ancestors, per unit.
  std::map<std::string, std::map<std::string, Rho>> carried;
  std::deque<std::string> queue{spine.root()};
  while (!queue.empty()) {
    const std::string g = queue.front();
    queue.pop_front();
    const GeoUnit& u = spine.unit(g);
    std::map<std::string, Rho> effective;
    const std::string& level = spine.level_name(u.level);
    for (const auto& [k, rho] : table.entries()) {
      if (k.first == level) effective[k.second] += rho;
    }
    auto c = carried.find(g);
    const bool has_carry = c != carried.end();
    if (has_carry) {
      for (const auto& [q, rho] : c->second) effective[q] += rho;
    }
    if (u.children.size() == 1) {
      out.MarkSkipped(g);
      carried[u.children.front()] = effective;
    } else if (has_carry) {
      for (const auto& [q, rho] : effective) out.SetUnitOverride(g, q, rho);
    }
    for (const auto& ch : u.children) queue.push_back(ch);
  }
  return out;
}

}  // namespace topdown
