#ifndef TOPDOWN_TOPDOWN_H_
#define TOPDOWN_TOPDOWN_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "topdown/constraints.h"
#include "topdown/measurement.h"
#include "topdown/nnls.h"
#include "topdown/spine.h"
#include "topdown/universe.h"

namespace topdown {

// Query groups estimated and frozen in order. The last pass must be an
// identity query; its rounding is the output.
struct PassPlan {
  std::vector<std::string> query_ids;
};

void ValidatePassPlan(const PassPlan& plan, const QueryCatalog& catalog);

struct TopdownOptions {
  PassPlan plan;
  NnlsOptions nnls;
  int workers = 1;
  // Called on every unit's final counts before its children are solved.
  std::function<void(const std::string& geocode,
                     std::vector<std::int64_t>* counts)>
      post_unit;
};

struct TopdownResult {
  CountMap units;
  std::vector<std::string> warnings;
};

// Solves the root from its own measurements, then every sibling group
// jointly under its parent's counts, level by level. A parent with a single
// child passes its counts down unchanged; an unmeasured single-child parent
// borrows the measurements of the first measured unit down its chain.
TopdownResult RunTopdown(const Spine& spine, const Universe& universe,
                         const QueryCatalog& catalog,
                         const MeasurementIndex& measurements,
                         const UnitConstraintMap& unit_constraints,
                         const TopdownOptions& options);

// One line per checked constraint:
// family,geocode,constraint,status,value,lo,hi
struct ConstraintReport {
  std::string text;
  int failures = 0;
};

ConstraintReport CheckConstraints(const Spine& spine, const Universe& universe,
                                  const CountMap& units,
                                  const UnitConstraintMap& unit_constraints);

}  // namespace topdown

#endif  // TOPDOWN_TOPDOWN_H_
