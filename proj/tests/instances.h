#ifndef TOPDOWN_TESTS_INSTANCES_H_
#define TOPDOWN_TESTS_INSTANCES_H_

// Random small problems shared by the unit tests and the acceptance binary,
// in both the library's form and the oracles' form.

#include <cstdint>
#include <random>
#include <vector>

#include "oracles.h"
#include "topdown/constraints.h"
#include "topdown/nnls.h"

namespace testing_instances {

struct RoundingInstance {
  std::vector<double> x_star;
  topdown::ConstraintSet constraints;
  std::vector<oracle::Row> rows;
};

// At most 12 cells in one of four shapes: a fixed grand total, fixed row sums
// of a table, fixed row and column sums (the column sums as parent-child
// rows), or a nested chain of fixed subtotals. x_star satisfies every
// constraint exactly.
RoundingInstance RandomRoundingInstance(std::mt19937_64& gen);

struct NnlsInstance {
  topdown::NnlsProblem problem;
  topdown::ConstraintSet constraints;
  std::vector<oracle::LsqTerm> terms;
  std::vector<oracle::Row> equalities;
};

// At most 6 cells, noisy per-cell and aggregate measurements, and at most 2
// feasible equality constraints over random subsets.
NnlsInstance RandomNnlsInstance(std::mt19937_64& gen);

// Converts a library constraint set to oracle rows.
std::vector<oracle::Row> ToOracleRows(const topdown::ConstraintSet& cs);

}  // namespace testing_instances

#endif  // TOPDOWN_TESTS_INSTANCES_H_
