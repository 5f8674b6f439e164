#ifndef TOPDOWN_GQ_REPAIR_H_
#define TOPDOWN_GQ_REPAIR_H_

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "topdown/query.h"
#include "topdown/random.h"
#include "topdown/schema.h"
#include "topdown/spine.h"

namespace topdown {

// Population bounds for one detailed GQ type in one unit.
struct GqBound {
  std::string geocode;
  int code = 0;
  std::int64_t lower = 0;  // occupied facilities of the type
  std::int64_t upper = 0;  // 99,999 per facility
};

inline constexpr std::int64_t kMaxGqResidents = 99999;

// 1..6 for codes below 700; every code from 700 up shares major type 7.
int MajorGqType(int code);

struct GqRepairConfig {
  std::string relgq_attribute = "RELGQ";
  std::string age_attribute = "AGE";
  std::map<std::string, int> gq_codes;  // RELGQ level label -> GQ code
  std::set<std::string> strict_levels;  // only RELGQ may change here
};

struct MovePair {
  std::int64_t donor = 0;
  std::int64_t recipient = 0;
  bool preserves_age = true;

  bool operator==(const MovePair&) const = default;
};

struct GqResidual {
  std::string geocode;
  int code = 0;
  std::int64_t count = 0;
  std::int64_t lower = 0;
  std::int64_t upper = 0;
};

struct RepairOutcome {
  std::int64_t moves = 0;
  std::vector<GqResidual> residuals;
};

class GqRepairer {
 public:
  // `preserved` are the prior-release queries every move must keep intact.
  GqRepairer(std::shared_ptr<const Schema> schema, GqRepairConfig config,
             std::vector<QueryGroup> preserved);

  // Candidate single-record moves that bring the count of GQ type `code`
  // toward [lower, upper] without pushing another type out of its bounds.
  // `bounds` maps each GQ code to (lower, upper).
  std::vector<MovePair> EnumerateMovePairs(
      const std::vector<std::int64_t>& counts, int code,
      const std::map<int, std::pair<std::int64_t, std::int64_t>>& bounds,
      bool strict) const;

  // Repairs GQ types in ascending code order, one uniformly chosen move at a
  // time. Types without a bound entry have bounds [0, 0].
  RepairOutcome RepairUnit(std::vector<std::int64_t>* counts,
                           const std::vector<GqBound>& bounds, bool strict,
                           KeyedRng& rng, const std::string& geocode) const;

  std::int64_t GqCount(const std::vector<std::int64_t>& counts,
                       int code) const;
  const std::vector<int>& codes() const { return codes_; }
  const GqRepairConfig& config() const { return config_; }

 private:
  std::shared_ptr<const Schema> schema_;
  GqRepairConfig config_;
  std::vector<QueryGroup> preserved_;
  int relgq_ = -1;
  int age_ = -1;
  std::vector<int> codes_;               // ascending
  std::map<int, int> level_of_code_;     // GQ code -> RELGQ level
};

KeyedRng RepairRng(std::uint64_t seed, const std::string& geocode);

// Bounds of every unit from block facility counts (block -> code -> count),
// aggregated up the spine. Every configured code gets an entry.
std::vector<GqBound> BuildGqBounds(
    const Spine& spine, const std::map<std::string, std::map<int, std::int64_t>>&
                            block_facilities,
    const std::vector<int>& codes);

std::string SerializeGqBounds(const std::vector<GqBound>& bounds);
std::vector<GqBound> ParseGqBounds(const std::string& text,
                                   const std::string& source);
std::string SerializeGqResiduals(const std::vector<GqResidual>& residuals);

}  // namespace topdown

#endif  // TOPDOWN_GQ_REPAIR_H_
