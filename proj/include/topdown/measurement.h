#ifndef TOPDOWN_MEASUREMENT_H_
#define TOPDOWN_MEASUREMENT_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "topdown/accountant.h"
#include "topdown/random.h"
#include "topdown/rational.h"
#include "topdown/spine.h"
#include "topdown/strategy.h"
#include "topdown/universe.h"

namespace topdown {

struct NoisyMeasurement {
  std::string level;
  std::string geocode;
  std::string query_id;
  std::int64_t cell = 0;
  std::int64_t value = 0;
  Rational sigma2;

  bool operator==(const NoisyMeasurement&) const = default;
};

struct Nmf {
  std::string run_id;
  std::vector<NoisyMeasurement> measurements;
};

struct MeasureOptions {
  std::uint64_t seed = 0;
  bool noiseless = false;  // debug only: inject zero noise
  int workers = 1;
};

// Seed path of the noise for one measured cell.
KeyedRng MeasurementRng(std::uint64_t seed, const std::string& geocode,
                        const std::string& query_id, std::int64_t cell);

// Noisy answers of every query in `row` (ρ > 0 each) on one unit, ordered by
// query id then cell.
std::vector<NoisyMeasurement> MeasureUnit(
    std::span<const std::int64_t> counts,
    const std::map<std::string, Rho>& row, const QueryCatalog& catalog,
    const std::string& level, const std::string& geocode,
    const MeasureOptions& options);

// Measures every non-skipped unit with its table row and records the spends.
// Output is sorted by (spine level, geocode, query id, cell).
Nmf RunMeasurementPhase(const Spine& spine, const CountMap& unit_counts,
                        const StrategyTable& table,
                        const QueryCatalog& catalog,
                        const MeasureOptions& options, std::string run_id,
                        Accountant* accountant);

// Measurements of one (unit, query), by output cell.
struct QueryMeasurement {
  std::vector<std::int64_t> values;
  Rational sigma2;
};

// geocode -> query id -> measurement.
using MeasurementIndex =
    std::map<std::string, std::map<std::string, QueryMeasurement>>;

// Groups an NMF by unit and query. Throws DataError on unknown queries,
// out-of-range or duplicate cells, mixed variances or incomplete queries.
MeasurementIndex IndexMeasurements(const Nmf& nmf, const QueryCatalog& catalog);

std::string SerializeNmf(const Nmf& nmf);
Nmf ParseNmf(const std::string& text, const std::string& source);
void WriteNmf(const Nmf& nmf, const std::string& path);
Nmf ReadNmf(const std::string& path);

}  // namespace topdown

#endif  // TOPDOWN_MEASUREMENT_H_
