#include "topdown/spine.h"

#include <algorithm>
#include <set>

#include "topdown/csv.h"
#include "topdown/errors.h"

namespace topdown {

Spine::Spine(std::vector<std::string> level_names,
             std::map<std::string, GeoUnit> units)
    : levels_(std::move(level_names)), units_(std::move(units)) {
  if (levels_.empty()) throw ValidationError("spine has no levels");
  std::set<std::string> seen(levels_.begin(), levels_.end());
  if (seen.size() != levels_.size()) {
    throw ValidationError("spine level names are not unique");
  }
  by_level_.assign(levels_.size(), {});
  int roots = 0;
  for (auto& [geocode, u] : units_) {
    if (u.geocode != geocode) {
      throw DataError("spine unit key mismatch for " + geocode);
    }
    if (u.level < 0 || u.level >= level_count()) {
      throw DataError("spine unit " + geocode + " has an unknown level");
    }
    by_level_[u.level].push_back(geocode);
    if (!u.parent) {
      ++roots;
      root_ = geocode;
      if (u.level != 0) {
        throw DataError("spine root " + geocode + " is not at the top level");
      }
      continue;
    }
    auto it = units_.find(*u.parent);
    if (it == units_.end()) {
      throw DataError("spine unit " + geocode + " has a missing parent");
    }
    if (it->second.level != u.level - 1) {
      throw DataError("spine unit " + geocode +
                      " is not one level below its parent");
    }
    const auto& ch = it->second.children;
    if (std::find(ch.begin(), ch.end(), geocode) == ch.end()) {
      throw DataError("spine unit " + geocode +
                      " is missing from its parent's children");
    }
  }
  if (roots != 1) {
    throw DataError("spine must have exactly one root, found " +
                    std::to_string(roots));
  }
  for (auto& [geocode, u] : units_) {
    std::sort(u.children.begin(), u.children.end());
    for (const auto& c : u.children) {
      auto it = units_.find(c);
      if (it == units_.end() || it->second.parent != geocode) {
        throw DataError("spine child " + c + " of " + geocode +
                        " is inconsistent");
      }
    }
  }
}

int Spine::LevelIndex(std::string_view name) const {
  for (int i = 0; i < level_count(); ++i) {
    if (levels_[i] == name) return i;
  }
  return -1;
}

const GeoUnit& Spine::unit(const std::string& geocode) const {
  auto it = units_.find(geocode);
  if (it == units_.end()) throw DataError("unknown geocode '" + geocode + "'");
  return it->second;
}

std::vector<std::string> Spine::PathToRoot(const std::string& geocode) const {
  std::vector<std::string> path;
  const GeoUnit* u = &unit(geocode);
  while (true) {
    path.push_back(u->geocode);
    if (!u->parent) break;
    u = &unit(*u->parent);
  }
  return path;
}

std::string Spine::Serialize() const {
  std::string out = "#levels";
  for (const auto& l : levels_) out += "," + l;
  out += "\n";
  for (int l = 0; l < level_count(); ++l) {
    for (const auto& g : by_level_[l]) {
      const auto& u = units_.at(g);
      out += g + "," + levels_[l] + "," + (u.parent ? *u.parent : "") + "\n";
    }
  }
  return out;
}

Spine Spine::Parse(const std::string& text) {
  std::vector<std::string> levels;
  std::map<std::string, GeoUnit> units;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    auto f = SplitCsv(line);
    if (f[0] == "#levels") {
      levels.assign(f.begin() + 1, f.end());
      continue;
    }
    if (f.size() != 3 || levels.empty()) {
      throw DataError("spine line " + std::to_string(line_no) +
                      " is malformed");
    }
    GeoUnit u;
    u.geocode = f[0];
    u.level = static_cast<int>(
        std::find(levels.begin(), levels.end(), f[1]) - levels.begin());
    if (u.level == static_cast<int>(levels.size())) {
      throw DataError("spine line " + std::to_string(line_no) +
                      " names unknown level " + f[1]);
    }
    // The root is the only unit at level 0; its parent field is empty.
    if (u.level > 0) u.parent = f[2];
    units[u.geocode] = u;
  }
  for (auto& [g, u] : units) {
    if (u.parent) {
      auto it = units.find(*u.parent);
      if (it == units.end()) {
        throw DataError("spine unit " + g + " has a missing parent");
      }
      it->second.children.push_back(g);
    }
  }
  return Spine(std::move(levels), std::move(units));
}

std::string Spine::Digest() const { return Sha256Hex(Serialize()); }

Spine BuildSpine(const std::vector<std::string>& block_geocodes,
                 const std::vector<int>& prefix_lengths,
                 const std::vector<std::string>& level_names) {
  if (prefix_lengths.size() != level_names.size() || prefix_lengths.empty()) {
    throw ValidationError("spine needs one prefix length per level");
  }
  for (std::size_t i = 1; i < prefix_lengths.size(); ++i) {
    if (prefix_lengths[i] <= prefix_lengths[i - 1]) {
      throw ValidationError("spine prefix lengths must strictly increase");
    }
  }
  if (prefix_lengths.front() < 0) {
    throw ValidationError("negative spine prefix length");
  }
  const std::size_t full = prefix_lengths.back();
  std::map<std::string, GeoUnit> units;
  for (const auto& b : block_geocodes) {
    if (b.size() != full) {
      throw DataError("geocode '" + b + "' does not have length " +
                      std::to_string(full));
    }
    for (std::size_t l = 0; l < prefix_lengths.size(); ++l) {
      const std::string g = b.substr(0, prefix_lengths[l]);
      auto [it, inserted] = units.try_emplace(g);
      GeoUnit& u = it->second;
      if (inserted) {
        u.geocode = g;
        u.level = static_cast<int>(l);
        if (l > 0) {
          u.parent = b.substr(0, prefix_lengths[l - 1]);
          units[*u.parent].children.push_back(g);
        }
      } else if (u.level != static_cast<int>(l)) {
        throw DataError("geocode prefix '" + g + "' of " + b +
                        " appears at two levels");
      }
    }
  }
  if (units.empty()) throw DataError("spine has no blocks");
  for (auto& [g, u] : units) {
    std::sort(u.children.begin(), u.children.end());
    u.children.erase(std::unique(u.children.begin(), u.children.end()),
                     u.children.end());
  }
  return Spine(level_names, std::move(units));
}

CountMap AggregateUp(const CountMap& block_counts, const Spine& spine) {
  std::vector<std::string> missing;
  std::size_t width = 0;
  for (const auto& b : spine.Blocks()) {
    auto it = block_counts.find(b);
    if (it == block_counts.end()) {
      missing.push_back(b);
    } else {
      width = it->second.size();
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) {
      list += (i ? ", " : "") + missing[i];
    }
    throw DataError("missing block histograms for " + list);
  }
  CountMap out;
  for (const auto& b : spine.Blocks()) {
    const auto& v = block_counts.at(b);
    if (v.size() != width) throw DataError("block " + b + " has wrong width");
    out[b] = v;
  }
  for (int l = spine.block_level() - 1; l >= 0; --l) {
    for (const auto& g : spine.UnitsAtLevel(l)) {
      std::vector<std::int64_t> sum(width, 0);
      for (const auto& c : spine.unit(g).children) {
        const auto& cv = out.at(c);
        for (std::size_t i = 0; i < width; ++i) sum[i] += cv[i];
      }
      out[g] = std::move(sum);
    }
  }
  return out;
}

std::map<std::string, Histogram> AggregateUp(
    const std::map<std::string, Histogram>& block_histograms,
    const Spine& spine) {
  CountMap counts;
  std::shared_ptr<const Schema> schema;
  for (const auto& [g, h] : block_histograms) {
    if (!spine.Contains(g) ||
        spine.unit(g).level != spine.block_level()) {
      continue;
    }
    if (schema && !schema->SameShape(h.schema())) {
      throw DataError("block histograms use different schemas");
    }
    schema = h.schema_ptr();
    counts[g] = h.counts();
  }
  CountMap agg = AggregateUp(counts, spine);
  std::map<std::string, Histogram> out;
  for (auto& [g, v] : agg) out.emplace(g, Histogram(schema, std::move(v)));
  return out;
}

}  // namespace topdown
