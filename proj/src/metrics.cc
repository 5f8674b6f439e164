#include "topdown/metrics.h"

#include <cmath>
#include <map>
#include <optional>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "topdown/csv.h"
#include "topdown/discrete_gaussian.h"
#include "topdown/errors.h"

namespace topdown {

void ValidateMetricRequest(const MetricRequest& request) {
  if (!(request.tolerance > 0)) {
    throw ValidationError("metric tolerance must be positive");
  }
  if (!(request.coverage > 0 && request.coverage < 1)) {
    throw ValidationError("metric coverage must lie in (0, 1)");
  }
}

std::int64_t TotalAbsoluteError(const CountMap& estimates,
                                const CountMap& truth,
                                const std::vector<std::string>& units,
                                const FlatQuery& query, std::int64_t cell) {
  std::int64_t total = 0;
  for (const auto& g : units) {
    auto e = estimates.find(g);
    auto t = truth.find(g);
    if (e == estimates.end() || t == truth.end()) {
      throw DataError("unit '" + g + "' missing from estimates or truth");
    }
    const auto qe = query.Evaluate(e->second);
    const auto qt = query.Evaluate(t->second);
    for (std::int64_t j = 0; j < query.rows(); ++j) {
      if (cell < 0 || j == cell) total += std::llabs(qe[j] - qt[j]);
    }
  }
  return total;
}

double Mae(const CountMap& estimates, const CountMap& truth,
           const std::vector<std::string>& units, const FlatQuery& query,
           std::int64_t cell) {
  if (units.empty()) throw DataError("MAE over no units");
  return static_cast<double>(
             TotalAbsoluteError(estimates, truth, units, query, cell)) /
         static_cast<double>(units.size());
}

KeyedRng MetricRng(std::uint64_t seed, std::size_t request_index) {
  return KeyedRng::ForPath(seed, std::string_view("metric"),
                           static_cast<std::uint64_t>(request_index));
}

NoisyMae ReleaseNoisyMae(const MetricRequest& request, const CountMap& estimates,
                         const CountMap& truth, const Spine& spine,
                         const QueryCatalog& catalog, KeyedRng& rng,
                         Accountant* accountant) {
  ValidateMetricRequest(request);
  const int level = spine.LevelIndex(request.level);
  if (level < 0) {
    throw ValidationError("metric names unknown level '" + request.level + "'");
  }
  const FlatQuery& query = catalog.at(request.query_id);
  const auto& units = spine.UnitsAtLevel(level);
  const std::int64_t g = static_cast<std::int64_t>(units.size());
  const std::int64_t tae =
      TotalAbsoluteError(estimates, truth, units, query, request.cell);
  NoisyMae out;
  out.units = g;
  out.rho = CalibrateRhoForRelease(request.tolerance, request.coverage, g);
  const std::int64_t noise =
      SampleDiscreteGaussian(Sigma2FromRho(out.rho), rng);
  out.true_mae = static_cast<double>(tae) / static_cast<double>(g);
  out.released = static_cast<double>(tae + noise) / static_cast<double>(g);
  if (accountant != nullptr) {
    accountant->Spend({request.level, request.query_id, "release", out.rho});
  }
  return out;
}

std::string SerializeMetrics(const std::vector<MetricRequest>& requests,
                             const std::vector<NoisyMae>& released,
                             const QueryCatalog& catalog) {
  std::ostringstream out;
  out << "query,level,group,noisy_mae,rho_num,rho_den\n";
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const auto& r = requests[i];
    const std::string group =
        r.cell < 0 ? "all" : catalog.at(r.query_id).group.OutputLabel(r.cell);
    out << r.query_id << ',' << r.level << ',' << group << ','
        << FormatDouble(released[i].released) << ','
        << NumeratorString(released[i].rho) << ','
        << DenominatorString(released[i].rho) << '\n';
  }
  return out.str();
}

namespace {

struct Estimate {
  double value = 0;
  double variance = 0;
};

class CiBuilder {
 public:
  CiBuilder(const MeasurementIndex& measurements, const Spine& spine,
            const Universe& universe, const QueryCatalog& catalog,
            const std::vector<bool>& in_target)
      : measurements_(measurements),
        spine_(spine),
        universe_(universe),
        catalog_(catalog),
        in_target_(in_target) {}

  std::optional<Estimate> At(const std::string& geocode) {
    double precision = 0, weighted = 0;
    auto add = [&](const Estimate& e) {
      precision += 1.0 / e.variance;
      weighted += e.value / e.variance;
    };
    auto it = measurements_.find(geocode);
    if (it != measurements_.end()) {
      for (const auto& [qid, qm] : it->second) {
        if (auto e = Direct(catalog_.at(qid), qm)) add(*e);
      }
    }
    const GeoUnit& unit = spine_.unit(geocode);
    if (!unit.children.empty()) {
      Estimate sum;
      bool complete = true;
      for (const auto& child : unit.children) {
        auto e = At(child);
        if (!e) {
          complete = false;
          break;
        }
        sum.value += e->value;
        sum.variance += e->variance;
      }
      if (complete) add(sum);
    }
    if (precision == 0) return std::nullopt;
    return Estimate{weighted / precision, 1.0 / precision};
  }

 private:
  // Sum of the query rows inside the target, if no row straddles it.
  std::optional<Estimate> Direct(const FlatQuery& q,
                                 const QueryMeasurement& qm) const {
    std::vector<int> state(q.rows(), 0);  // bit 1: inside, bit 2: outside
    for (std::int64_t c = 0; c < q.matrix.cols; ++c) {
      const std::int64_t flat = q.offset + c;
      if (universe_.IsFixedZero(flat)) continue;
      state[q.matrix.row_of_col[c]] |= in_target_[flat] ? 1 : 2;
    }
    Estimate e;
    bool any = false;
    const double sigma2 = ToDouble(qm.sigma2);
    for (std::int64_t j = 0; j < q.rows(); ++j) {
      if (state[j] == 3) return std::nullopt;
      if (state[j] == 1) {
        e.value += static_cast<double>(qm.values[j]);
        e.variance += sigma2;
        any = true;
      }
    }
    if (!any) return std::nullopt;
    return e;
  }

  const MeasurementIndex& measurements_;
  const Spine& spine_;
  const Universe& universe_;
  const QueryCatalog& catalog_;
  const std::vector<bool>& in_target_;
};

}  // namespace

ConfidenceInterval CiFromNmf(const MeasurementIndex& measurements,
                             const Spine& spine, const Universe& universe,
                             const QueryCatalog& catalog,
                             const CiTarget& target, double confidence) {
  if (!(confidence > 0 && confidence < 1)) {
    throw ValidationError("confidence must lie in (0, 1)");
  }
  if (!spine.Contains(target.geocode)) {
    throw DataError("CI target names unknown unit '" + target.geocode + "'");
  }
  const FlatQuery& q = catalog.at(target.query_id);
  if (target.cell < 0 || target.cell >= q.rows()) {
    throw DataError("CI target cell out of range for '" + target.query_id +
                    "'");
  }
  std::vector<bool> in_target(universe.cell_count(), false);
  bool any_free = false;
  for (std::int64_t c = 0; c < q.matrix.cols; ++c) {
    if (q.matrix.row_of_col[c] == target.cell) {
      in_target[q.offset + c] = true;
      any_free = any_free || !universe.IsFixedZero(q.offset + c);
    }
  }
  if (!any_free) {
    throw DataError("CI target " + target.query_id + ":" +
                    std::to_string(target.cell) +
                    " covers only structural zeros");
  }
  CiBuilder builder(measurements, spine, universe, catalog, in_target);
  const auto e = builder.At(target.geocode);
  if (!e) {
    throw DataError("unsupported CI target " + target.geocode + "/" +
                    target.query_id + ":" + std::to_string(target.cell) +
                    ": no measured query at this unit or below is at least as "
                    "granular as the target");
  }
  ConfidenceInterval ci;
  ci.target = target;
  ci.estimate = e->value;
  ci.variance = e->variance;
  ci.confidence = confidence;
  const boost::math::normal_distribution<double> normal;
  ci.half_width =
      boost::math::quantile(normal, 0.5 + confidence / 2) * std::sqrt(e->variance);
  return ci;
}

std::string SerializeCis(const std::vector<ConfidenceInterval>& cis) {
  std::ostringstream out;
  out << "geocode,query,cell,estimate,lower,upper,confidence\n";
  for (const auto& ci : cis) {
    out << ci.target.geocode << ',' << ci.target.query_id << ','
        << ci.target.cell << ',' << FormatDouble(ci.estimate) << ','
        << FormatDouble(ci.lower()) << ',' << FormatDouble(ci.upper()) << ','
        << FormatDouble(ci.confidence) << '\n';
  }
  return out.str();
}

}  // namespace topdown
