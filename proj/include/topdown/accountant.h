#ifndef TOPDOWN_ACCOUNTANT_H_
#define TOPDOWN_ACCOUNTANT_H_

#include <set>
#include <string>
#include <vector>

#include "topdown/rational.h"
#include "topdown/spine.h"
#include "topdown/strategy.h"

namespace topdown {

// unit_class is "level" for a level-wide spend (all measured units of the
// level, composing in parallel), "unit:<geocode>" for a single unit whose
// allocation was adjusted, and "release" for a metric release.
struct LedgerEntry {
  std::string level;
  std::string query_id;
  std::string unit_class;
  Rho rho;
};

class Accountant {
 public:
  void Spend(LedgerEntry entry);
  void MarkSkipped(const std::string& geocode) { skipped_.insert(geocode); }
  const std::vector<LedgerEntry>& ledger() const { return ledger_; }

  // Per-record loss of the measurement phase plus every release. Measurement
  // spends compose in parallel across units of a level and add along each
  // root-to-block path; the total takes the worst path. Without a spine,
  // level-wide entries are simply summed.
  Rho Total(const Spine* spine = nullptr) const;
  Rho MeasurementTotal(const Spine* spine = nullptr) const;
  Rho ReleaseTotal() const;

  // level,query_id,rho_numerator,rho_denominator,sigma2,unit_class
  std::string ExportCsv() const;

 private:
  std::vector<LedgerEntry> ledger_;
  std::set<std::string> skipped_;
};

// Ledger of the measurement phase implied by a (possibly adjusted) table.
Accountant AccountantForTable(const StrategyTable& table, const Spine* spine);

Rho TotalRho(const StrategyTable& table, const Spine* spine = nullptr);

// Grid of candidate budgets: 1e-8 * 1.01^k up to 1e3, each rounded to six
// significant decimal digits so it is an exact small rational.
const std::vector<Rho>& ReleaseRhoGrid();

// Smallest grid rho whose discrete Gaussian puts at least `coverage` mass on
// |k| <= floor(tolerance * scale). Throws ValidationError if unattainable.
Rho CalibrateRhoForRelease(double tolerance, double coverage,
                           std::int64_t scale);

}  // namespace topdown

#endif  // TOPDOWN_ACCOUNTANT_H_
