#include "topdown/gq_repair.h"

#include <algorithm>
#include <sstream>
#include <utility>

#include "topdown/csv.h"
#include "topdown/errors.h"

namespace topdown {

int MajorGqType(int code) { return code < 700 ? code / 100 : 7; }

GqRepairer::GqRepairer(std::shared_ptr<const Schema> schema,
                       GqRepairConfig config, std::vector<QueryGroup> preserved)
    : schema_(std::move(schema)),
      config_(std::move(config)),
      preserved_(std::move(preserved)) {
  relgq_ = schema_->AttributeIndex(config_.relgq_attribute);
  age_ = schema_->AttributeIndex(config_.age_attribute);
  if (relgq_ < 0 || age_ < 0) {
    throw ValidationError("GQ repair needs attributes '" +
                          config_.relgq_attribute + "' and '" +
                          config_.age_attribute + "'");
  }
  for (const auto& [label, code] : config_.gq_codes) {
    const int level = schema_->attribute(relgq_).LevelIndex(label);
    if (level < 0) {
      throw ValidationError("GQ repair names unknown " +
                            config_.relgq_attribute + " level '" + label + "'");
    }
    if (!level_of_code_.emplace(code, level).second) {
      throw ValidationError("GQ code " + std::to_string(code) +
                            " is mapped twice");
    }
    codes_.push_back(code);
  }
  std::sort(codes_.begin(), codes_.end());
  for (const auto& q : preserved_) {
    if (!q.schema().SameShape(*schema_)) {
      throw ValidationError("preserved query '" + q.id() +
                            "' is over a different schema");
    }
  }
}

std::int64_t GqRepairer::GqCount(const std::vector<std::int64_t>& counts,
                                 int code) const {
  const int level = level_of_code_.at(code);
  std::int64_t total = 0;
  for (std::int64_t c = 0; c < schema_->cell_count(); ++c) {
    if (schema_->LevelOf(c, relgq_) == level) total += counts[c];
  }
  return total;
}

std::vector<MovePair> GqRepairer::EnumerateMovePairs(
    const std::vector<std::int64_t>& counts, int code,
    const std::map<int, std::pair<std::int64_t, std::int64_t>>& bounds,
    bool strict) const {
  auto bound = [&](int t) {
    auto it = bounds.find(t);
    return it == bounds.end() ? std::pair<std::int64_t, std::int64_t>{0, 0}
                              : it->second;
  };
  const std::int64_t count = GqCount(counts, code);
  const auto [lo, hi] = bound(code);
  if (count >= lo && count <= hi) return {};
  const bool inward = count < lo;

  std::vector<int> donor_levels, recipient_levels;
  for (int other : codes_) {
    if (other == code || MajorGqType(other) != MajorGqType(code)) continue;
    const auto [olo, ohi] = bound(other);
    const std::int64_t oc = GqCount(counts, other);
    if (inward && oc - 1 >= olo) donor_levels.push_back(level_of_code_.at(other));
    if (!inward && oc + 1 <= ohi) {
      recipient_levels.push_back(level_of_code_.at(other));
    }
  }
  if (inward) {
    recipient_levels = {level_of_code_.at(code)};
  } else {
    donor_levels = {level_of_code_.at(code)};
  }

  const int ages = schema_->attribute(age_).size();
  std::vector<int> levels(schema_->attribute_count());
  std::vector<MovePair> keep_age, change_age;
  auto preserves = [&](std::int64_t d, std::int64_t r) {
    for (const auto& q : preserved_) {
      if (q.OutputCell(d) != q.OutputCell(r)) return false;
    }
    return true;
  };
  for (std::int64_t d = 0; d < schema_->cell_count(); ++d) {
    if (counts[d] <= 0) continue;
    const int dl = schema_->LevelOf(d, relgq_);
    if (std::find(donor_levels.begin(), donor_levels.end(), dl) ==
        donor_levels.end()) {
      continue;
    }
    schema_->CellLevels(d, levels);
    const int donor_age = levels[age_];
    for (int rl : recipient_levels) {
      levels[relgq_] = rl;
      levels[age_] = donor_age;
      const std::int64_t same = schema_->CellIndex(levels);
      if (schema_->IsValid(same) && preserves(d, same)) {
        keep_age.push_back({d, same, true});
      }
      if (strict) continue;
      for (int a = 0; a < ages; ++a) {
        if (a == donor_age) continue;
        levels[age_] = a;
        const std::int64_t r = schema_->CellIndex(levels);
        if (schema_->IsValid(r) && preserves(d, r)) {
          change_age.push_back({d, r, false});
        }
      }
    }
  }
  return keep_age.empty() && !strict ? change_age : keep_age;
}

RepairOutcome GqRepairer::RepairUnit(std::vector<std::int64_t>* counts,
                                     const std::vector<GqBound>& bounds,
                                     bool strict, KeyedRng& rng,
                                     const std::string& geocode) const {
  std::map<int, std::pair<std::int64_t, std::int64_t>> by_code;
  for (const auto& b : bounds) by_code[b.code] = {b.lower, b.upper};
  RepairOutcome outcome;
  for (int code : codes_) {
    while (true) {
      const auto pairs = EnumerateMovePairs(*counts, code, by_code, strict);
      if (pairs.empty()) break;
      const MovePair& pick = pairs[rng.UniformBelow(pairs.size())];
      --(*counts)[pick.donor];
      ++(*counts)[pick.recipient];
      ++outcome.moves;
    }
    const std::int64_t count = GqCount(*counts, code);
    auto it = by_code.find(code);
    const auto [lo, hi] =
        it == by_code.end() ? std::pair<std::int64_t, std::int64_t>{0, 0}
                            : it->second;
    if (count < lo || count > hi) {
      outcome.residuals.push_back({geocode, code, count, lo, hi});
    }
  }
  return outcome;
}

KeyedRng RepairRng(std::uint64_t seed, const std::string& geocode) {
  return KeyedRng::ForPath(seed, std::string_view("repair"),
                           std::string_view(geocode));
}

std::vector<GqBound> BuildGqBounds(
    const Spine& spine,
    const std::map<std::string, std::map<int, std::int64_t>>& block_facilities,
    const std::vector<int>& codes) {
  CountMap blocks;
  for (const auto& b : spine.Blocks()) {
    std::vector<std::int64_t> v(codes.size(), 0);
    auto it = block_facilities.find(b);
    if (it != block_facilities.end()) {
      for (const auto& [code, n] : it->second) {
        auto pos = std::find(codes.begin(), codes.end(), code);
        if (pos == codes.end()) {
          throw DataError("block '" + b + "' lists unknown GQ code " +
                          std::to_string(code));
        }
        if (n < 0) throw DataError("negative facility count in '" + b + "'");
        v[pos - codes.begin()] = n;
      }
    }
    blocks[b] = std::move(v);
  }
  for (const auto& [g, _] : block_facilities) {
    if (!blocks.count(g)) {
      throw DataError("GQ facilities listed for unknown block '" + g + "'");
    }
  }
  const CountMap all = AggregateUp(blocks, spine);
  std::vector<GqBound> out;
  for (int l = 0; l < spine.level_count(); ++l) {
    for (const auto& g : spine.UnitsAtLevel(l)) {
      const auto& v = all.at(g);
      for (std::size_t i = 0; i < codes.size(); ++i) {
        out.push_back({g, codes[i], v[i], v[i] * kMaxGqResidents});
      }
    }
  }
  return out;
}

std::string SerializeGqBounds(const std::vector<GqBound>& bounds) {
  std::ostringstream out;
  out << "geocode,gq_type,lower,upper\n";
  for (const auto& b : bounds) {
    out << b.geocode << ',' << b.code << ',' << b.lower << ',' << b.upper
        << '\n';
  }
  return out.str();
}

std::vector<GqBound> ParseGqBounds(const std::string& text,
                                   const std::string& source) {
  const CsvTable table = ParseCsv(text, source);
  if (JoinCsv(table.header) != "geocode,gq_type,lower,upper") {
    throw DataError(source + ": unexpected header");
  }
  std::vector<GqBound> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& f = table.rows[r];
    const std::string where =
        source + ":" + std::to_string(table.line_numbers[r]);
    GqBound b{f[0], static_cast<int>(ParseInt64(f[1], where + " gq_type")),
              ParseInt64(f[2], where + " lower"),
              ParseInt64(f[3], where + " upper")};
    if (b.lower < 0 || b.lower > b.upper) {
      throw DataError(where + ": need 0 <= lower <= upper");
    }
    out.push_back(std::move(b));
  }
  return out;
}

std::string SerializeGqResiduals(const std::vector<GqResidual>& residuals) {
  std::ostringstream out;
  out << "geocode,gq_type,final_count,lower,upper\n";
  for (const auto& r : residuals) {
    out << r.geocode << ',' << r.code << ',' << r.count << ',' << r.lower
        << ',' << r.upper << '\n';
  }
  return out.str();
}

}  // namespace topdown
