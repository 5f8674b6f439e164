#ifndef TOPDOWN_SPINE_H_
#define TOPDOWN_SPINE_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "topdown/histogram.h"

namespace topdown {

struct GeoUnit {
  std::string geocode;
  int level = 0;  // index into Spine::levels()
  std::optional<std::string> parent;
  std::vector<std::string> children;  // ascending geocode order
};

class Spine {
 public:
  // Validates the tree: one root, parents one level up, children consistent.
  Spine(std::vector<std::string> level_names,
        std::map<std::string, GeoUnit> units);

  const std::vector<std::string>& levels() const { return levels_; }
  int level_count() const { return static_cast<int>(levels_.size()); }
  int LevelIndex(std::string_view name) const;  // -1 if absent
  const std::string& level_name(int level) const { return levels_[level]; }
  int block_level() const { return level_count() - 1; }

  const std::string& root() const { return root_; }
  bool Contains(const std::string& geocode) const {
    return units_.count(geocode) != 0;
  }
  const GeoUnit& unit(const std::string& geocode) const;
  const std::map<std::string, GeoUnit>& units() const { return units_; }
  const std::vector<std::string>& UnitsAtLevel(int level) const {
    return by_level_[level];
  }
  const std::vector<std::string>& Blocks() const {
    return by_level_[block_level()];
  }
  // The unit itself followed by its ancestors up to the root.
  std::vector<std::string> PathToRoot(const std::string& geocode) const;

  // Header line "#levels,<names...>" then geocode,level,parent triples in
  // (level, geocode) order.
  std::string Serialize() const;
  static Spine Parse(const std::string& text);
  std::string Digest() const;

 private:
  std::vector<std::string> levels_;
  std::map<std::string, GeoUnit> units_;
  std::vector<std::vector<std::string>> by_level_;
  std::string root_;
};

// Units at level L are the length-prefix_lengths[L] prefixes of the block
// geocodes; the first level must collapse to a single root.
Spine BuildSpine(const std::vector<std::string>& block_geocodes,
                 const std::vector<int>& prefix_lengths,
                 const std::vector<std::string>& level_names);

using CountMap = std::map<std::string, std::vector<std::int64_t>>;

// Parent counts are the cellwise sums of child counts, for every non-block
// unit. Throws DataError listing blocks without data.
CountMap AggregateUp(const CountMap& block_counts, const Spine& spine);

std::map<std::string, Histogram> AggregateUp(
    const std::map<std::string, Histogram>& block_histograms,
    const Spine& spine);

}  // namespace topdown

#endif  // TOPDOWN_SPINE_H_
