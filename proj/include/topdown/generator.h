#ifndef TOPDOWN_GENERATOR_H_
#define TOPDOWN_GENERATOR_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "topdown/config.h"
#include "topdown/histogram.h"
#include "topdown/schema.h"

namespace topdown {

// block geocode -> GQ code -> occupied facilities
using FacilityCounts = std::map<std::string, std::map<int, std::int64_t>>;

struct ToyUniverse {
  std::vector<std::string> block_geocodes;  // ascending
  std::vector<MicrodataRecord> records;     // grouped by block, ascending
  FacilityCounts facilities;
};

// Synthetic person records: households of one householder plus members, and
// GQ facilities planted in a share of the blocks. Every record is a valid
// cell. Block geocodes concatenate a root digit and one zero-padded
// 1-based index per level.
ToyUniverse GenerateToyUniverse(const RunConfig& config, std::uint64_t seed);

// GEOCODE followed by one column per schema attribute.
std::string SerializeMicrodata(const Schema& schema,
                               const std::vector<MicrodataRecord>& records);
std::vector<MicrodataRecord> ParseMicrodata(const std::string& text,
                                            const Schema& schema,
                                            const std::string& source);

// geocode,gq_type,facilities
std::string SerializeFacilities(const FacilityCounts& facilities);
FacilityCounts ParseFacilities(const std::string& text,
                               const std::string& source);

}  // namespace topdown

#endif  // TOPDOWN_GENERATOR_H_
