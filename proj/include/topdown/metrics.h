#ifndef TOPDOWN_METRICS_H_
#define TOPDOWN_METRICS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "topdown/accountant.h"
#include "topdown/measurement.h"
#include "topdown/random.h"
#include "topdown/spine.h"
#include "topdown/universe.h"

namespace topdown {

struct MetricRequest {
  std::string query_id;
  std::string level;
  std::int64_t cell = -1;  // output cell, or -1 for every cell
  double tolerance = 0.5;
  double coverage = 0.9;
};

void ValidateMetricRequest(const MetricRequest& request);

// Sum over `units` of |est - truth| across the requested query cells.
std::int64_t TotalAbsoluteError(const CountMap& estimates,
                                const CountMap& truth,
                                const std::vector<std::string>& units,
                                const FlatQuery& query, std::int64_t cell);

double Mae(const CountMap& estimates, const CountMap& truth,
           const std::vector<std::string>& units, const FlatQuery& query,
           std::int64_t cell = -1);

struct NoisyMae {
  double released = 0;
  double true_mae = 0;
  Rho rho;
  std::int64_t units = 0;
};

KeyedRng MetricRng(std::uint64_t seed, std::size_t request_index);

// Adds discrete Gaussian noise calibrated so that |released - MAE| stays
// within the tolerance with the requested probability, and ledgers the ρ.
NoisyMae ReleaseNoisyMae(const MetricRequest& request, const CountMap& estimates,
                         const CountMap& truth, const Spine& spine,
                         const QueryCatalog& catalog, KeyedRng& rng,
                         Accountant* accountant);

// metrics.csv: query,level,group,noisy_mae,rho_num,rho_den
std::string SerializeMetrics(const std::vector<MetricRequest>& requests,
                             const std::vector<NoisyMae>& released,
                             const QueryCatalog& catalog);

struct CiTarget {
  std::string geocode;
  std::string query_id;
  std::int64_t cell = 0;
};

struct ConfidenceInterval {
  CiTarget target;
  double estimate = 0;
  double variance = 0;
  double half_width = 0;
  double confidence = 0.9;

  double lower() const { return estimate - half_width; }
  double upper() const { return estimate + half_width; }
};

// Inverse-variance combination, at the target unit and recursively below,
// of every measured query whose rows do not straddle the target's cells
// (structural zeros ignored). Throws DataError if nothing qualifies.
ConfidenceInterval CiFromNmf(const MeasurementIndex& measurements,
                             const Spine& spine, const Universe& universe,
                             const QueryCatalog& catalog,
                             const CiTarget& target, double confidence);

// ci.csv: geocode,query,cell,estimate,lower,upper,confidence
std::string SerializeCis(const std::vector<ConfidenceInterval>& cis);

}  // namespace topdown

#endif  // TOPDOWN_METRICS_H_
