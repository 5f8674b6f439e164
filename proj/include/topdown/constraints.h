#ifndef TOPDOWN_CONSTRAINTS_H_
#define TOPDOWN_CONSTRAINTS_H_

#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "topdown/spine.h"
#include "topdown/universe.h"

namespace topdown {

enum class ConstraintFamily {
  kParentChild,
  kInvariant,
  kPriorRelease,
  kFrozen,
  kLinkage,
  kBound,
};

const char* FamilyName(ConstraintFamily family);

struct Term {
  std::int64_t var = 0;
  int coef = 1;  // +1 or -1

  bool operator==(const Term&) const = default;
};

inline constexpr std::int64_t kNoUpper = std::numeric_limits<std::int64_t>::max();

// lo <= sum(coef * x[var]) <= hi; equalities have lo == hi.
struct LinearConstraint {
  ConstraintFamily family = ConstraintFamily::kInvariant;
  std::string name;
  std::vector<Term> terms;
  std::int64_t lo = 0;
  std::int64_t hi = 0;

  bool is_equality() const { return lo == hi; }
  bool all_positive() const;
  std::int64_t Evaluate(std::span<const std::int64_t> x) const;
  double Evaluate(std::span<const double> x) const;
  bool SatisfiedBy(std::span<const std::int64_t> x) const {
    const std::int64_t v = Evaluate(x);
    return v >= lo && v <= hi;
  }
};

struct ConstraintSet {
  std::int64_t num_vars = 0;
  std::vector<bool> fixed_zero;  // size num_vars
  std::vector<LinearConstraint> constraints;

  explicit ConstraintSet(std::int64_t n = 0) : num_vars(n), fixed_zero(n) {}

  // Names of violated constraints, plus "fixed_zero:<var>" for nonzero fixed
  // variables and "negative:<var>" for negative entries.
  std::vector<std::string> Violations(std::span<const std::int64_t> x) const;
};

// Variables forced to zero: the fixed ones, then repeatedly every variable of
// an all-positive constraint whose upper bound is 0.
std::vector<bool> PropagateZeros(const ConstraintSet& set);

// Configured sources of per-unit constraints.
struct InvariantSpec {
  std::string query_id;
  std::string level;  // applies here and at every coarser level
  std::vector<std::int64_t> cells;  // output cells to hold; empty = all
};

struct LinkageSpec {
  std::string name;
  std::string main_query;
  std::int64_t main_cell = 0;
  std::string units_query;
  std::int64_t units_cell = 0;
};

struct ConstraintConfig {
  std::vector<InvariantSpec> invariants;
  std::vector<std::string> prior_release_queries;
  std::vector<LinkageSpec> linkage;
};

// Per-unit constraints over the unit's own flat cells (var = cell index).
using UnitConstraintMap = std::map<std::string, std::vector<LinearConstraint>>;

// geocode -> query id -> output values.
using Tabulations =
    std::map<std::string, std::map<std::string, std::vector<std::int64_t>>>;

// Tabulates `query_ids` for every unit.
Tabulations Tabulate(const CountMap& unit_counts, const QueryCatalog& catalog,
                     const std::vector<std::string>& query_ids);

// Checks prior-release tabulations are present for every unit and add up the
// spine. Throws DataError on the first inconsistency.
void ValidatePriorRelease(const Tabulations& prior, const Spine& spine,
                          const QueryCatalog& catalog,
                          const std::vector<std::string>& query_ids);

// Emits invariants (values from the confidential counts), prior-release
// equalities and linkage equalities for every unit, then verifies that the
// confidential counts satisfy all of them. Query cells that only cover
// structural zeros are skipped.
UnitConstraintMap BuildUnitConstraints(const Spine& spine,
                                       const Universe& universe,
                                       const QueryCatalog& catalog,
                                       const ConstraintConfig& config,
                                       const CountMap& unit_counts,
                                       const Tabulations& prior_release);

// Constraint set of a sibling group: child k's cell c is var k * C + c.
// Adds parent-child sums when `parent` is given.
ConstraintSet BuildConstraints(const Universe& universe,
                               const std::vector<std::string>& units,
                               const UnitConstraintMap& unit_constraints,
                               const std::vector<std::int64_t>* parent);

std::string SerializeUnitConstraints(const UnitConstraintMap& map,
                                     const Spine& spine);
UnitConstraintMap ParseUnitConstraints(const std::string& text,
                                       const std::string& source);

}  // namespace topdown

#endif  // TOPDOWN_CONSTRAINTS_H_
