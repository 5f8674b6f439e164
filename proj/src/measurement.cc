#include "topdown/measurement.h"

#include <algorithm>
#include <sstream>
#include <utility>

#include "topdown/csv.h"
#include "topdown/discrete_gaussian.h"
#include "topdown/errors.h"
#include "topdown/parallel.h"

namespace topdown {

namespace {

constexpr char kNmfHeader[] =
    "run_id,level,geocode,query_id,cell_index,value,sigma2_num,sigma2_den";

}  // namespace

KeyedRng MeasurementRng(std::uint64_t seed, const std::string& geocode,
                        const std::string& query_id, std::int64_t cell) {
  return KeyedRng::ForPath(seed, std::string_view("measure"),
                           std::string_view(geocode),
                           std::string_view(query_id),
                           static_cast<std::uint64_t>(cell));
}

std::vector<NoisyMeasurement> MeasureUnit(
    std::span<const std::int64_t> counts,
    const std::map<std::string, Rho>& row, const QueryCatalog& catalog,
    const std::string& level, const std::string& geocode,
    const MeasureOptions& options) {
  std::vector<NoisyMeasurement> out;
  for (const auto& [query_id, rho] : row) {
    const FlatQuery& query = catalog.at(query_id);
    const DiscreteGaussianParams params = Sigma2FromRho(rho);
    const DiscreteGaussianSampler sampler(params);
    const std::vector<std::int64_t> answers = query.Evaluate(counts);
    for (std::int64_t cell = 0; cell < query.rows(); ++cell) {
      std::int64_t noise = 0;
      if (!options.noiseless) {
        KeyedRng rng = MeasurementRng(options.seed, geocode, query_id, cell);
        noise = sampler.Sample(rng);
      }
      out.push_back({level, geocode, query_id, cell, answers[cell] + noise,
                     params.sigma2});
    }
  }
  return out;
}

Nmf RunMeasurementPhase(const Spine& spine, const CountMap& unit_counts,
                        const StrategyTable& table,
                        const QueryCatalog& catalog,
                        const MeasureOptions& options, std::string run_id,
                        Accountant* accountant) {
  // Units in (level, geocode) order; each task fills its own slot.
  std::vector<std::string> units;
  for (int l = 0; l < spine.level_count(); ++l) {
    for (const auto& g : spine.UnitsAtLevel(l)) units.push_back(g);
  }
  std::vector<std::vector<NoisyMeasurement>> per_unit(units.size());
  ParallelFor(units.size(), options.workers, [&](std::size_t i) {
    const std::string& g = units[i];
    const auto row = table.RowFor(g, spine);
    if (row.empty()) return;
    auto it = unit_counts.find(g);
    if (it == unit_counts.end()) {
      throw DataError("no counts for unit '" + g + "'");
    }
    per_unit[i] = MeasureUnit(it->second, row, catalog,
                              spine.level_name(spine.unit(g).level), g,
                              options);
  });
  Nmf nmf;
  nmf.run_id = std::move(run_id);
  for (auto& v : per_unit) {
    for (auto& m : v) nmf.measurements.push_back(std::move(m));
  }
  if (accountant != nullptr) {
    const Accountant spent = AccountantForTable(table, &spine);
    for (const auto& e : spent.ledger()) accountant->Spend(e);
    for (const auto& g : table.skipped()) accountant->MarkSkipped(g);
  }
  return nmf;
}

MeasurementIndex IndexMeasurements(const Nmf& nmf,
                                   const QueryCatalog& catalog) {
  MeasurementIndex index;
  std::map<std::pair<std::string, std::string>, std::vector<bool>> seen;
  for (const auto& m : nmf.measurements) {
    const std::string what = "measurement " + m.geocode + "/" + m.query_id +
                             "/" + std::to_string(m.cell);
    if (!catalog.Contains(m.query_id)) {
      throw DataError(what + ": unknown query");
    }
    const std::int64_t rows = catalog.at(m.query_id).rows();
    if (m.cell < 0 || m.cell >= rows) throw DataError(what + ": bad cell");
    auto& qm = index[m.geocode][m.query_id];
    auto& mark = seen[{m.geocode, m.query_id}];
    if (qm.values.empty()) {
      qm.values.assign(rows, 0);
      qm.sigma2 = m.sigma2;
      mark.assign(rows, false);
    } else if (qm.sigma2 != m.sigma2) {
      throw DataError(what + ": variance differs within the query");
    }
    if (mark[m.cell]) throw DataError(what + ": duplicate");
    mark[m.cell] = true;
    qm.values[m.cell] = m.value;
  }
  for (const auto& [key, mark] : seen) {
    if (std::find(mark.begin(), mark.end(), false) != mark.end()) {
      throw DataError("measurement " + key.first + "/" + key.second +
                      " is missing cells");
    }
  }
  return index;
}

std::string SerializeNmf(const Nmf& nmf) {
  std::ostringstream out;
  out << kNmfHeader << '\n';
  for (const auto& m : nmf.measurements) {
    out << nmf.run_id << ',' << m.level << ',' << m.geocode << ','
        << m.query_id << ',' << m.cell << ',' << m.value << ','
        << NumeratorString(m.sigma2) << ',' << DenominatorString(m.sigma2)
        << '\n';
  }
  return out.str();
}

Nmf ParseNmf(const std::string& text, const std::string& source) {
  const CsvTable table = ParseCsv(text, source);
  if (JoinCsv(table.header) != kNmfHeader) {
    throw DataError(source + ": unexpected header, want " +
                    std::string(kNmfHeader));
  }
  Nmf nmf;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& f = table.rows[r];
    const std::string where =
        source + ":" + std::to_string(table.line_numbers[r]);
    if (r == 0) {
      nmf.run_id = f[0];
    } else if (f[0] != nmf.run_id) {
      throw DataError(where + ": mixed run ids");
    }
    NoisyMeasurement m;
    m.level = f[1];
    m.geocode = f[2];
    m.query_id = f[3];
    m.cell = ParseInt64(f[4], where + " cell_index");
    m.value = ParseInt64(f[5], where + " value");
    const std::int64_t num = ParseInt64(f[6], where + " sigma2_num");
    const std::int64_t den = ParseInt64(f[7], where + " sigma2_den");
    if (num <= 0 || den <= 0) {
      throw DataError(where + ": sigma2 must be positive");
    }
    m.sigma2 = MakeRational(num, den);
    nmf.measurements.push_back(std::move(m));
  }
  return nmf;
}

void WriteNmf(const Nmf& nmf, const std::string& path) {
  WriteFile(path, SerializeNmf(nmf));
}

Nmf ReadNmf(const std::string& path) { return ParseNmf(ReadFile(path), path); }

}  // namespace topdown
