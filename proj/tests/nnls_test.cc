#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "instances.h"
#include "oracles.h"
#include "topdown/errors.h"
#include "topdown/nnls.h"

namespace topdown {
namespace {

TEST(NnlsTest, IdentityWithNonnegativeMeasurementsIsExact) {
  NnlsProblem p;
  p.num_vars = 3;
  p.rows = {{{0}, 4.0, 1.0}, {{1}, 0.0, 1.0}, {{2}, 7.5, 2.0}};
  const FractionalSolution s = SolveNnls(p);
  EXPECT_NEAR(s.x[0], 4.0, 1e-6);
  // A zero target sits on the bound with a zero multiplier; interior-point
  // iterates approach it only at the square root of the complementarity gap.
  EXPECT_NEAR(s.x[1], 0.0, 1e-3);
  EXPECT_NEAR(s.x[2], 7.5, 1e-6);
  EXPECT_NEAR(s.objective, 0.0, 1e-6);
}

TEST(NnlsTest, NegativeMeasurementBindsAtZero) {
  NnlsProblem p;
  p.num_vars = 1;
  p.rows = {{{0}, -3.0, 1.0}};
  const FractionalSolution s = SolveNnls(p);
  EXPECT_NEAR(s.x[0], 0.0, 1e-6);
  EXPECT_NEAR(s.objective, 9.0, 1e-5);
}

TEST(NnlsTest, ParentFixedSiblingsMatchGridSearch) {
  // Two children, two cells each; child k cell c is var 2k + c and the parent
  // holds (5, 5).
  NnlsProblem p;
  p.num_vars = 4;
  p.rows = {{{0}, 3.2, 1.0}, {{1}, 1.1, 1.0}, {{2}, 2.7, 0.5},
            {{3}, 4.6, 0.5}, {{0, 1}, 5.0, 2.0}};
  ConstraintSet cs(4);
  cs.constraints.push_back(
      {ConstraintFamily::kParentChild, "pc:0", {{0, 1}, {2, 1}}, 5, 5});
  cs.constraints.push_back(
      {ConstraintFamily::kParentChild, "pc:1", {{1, 1}, {3, 1}}, 5, 5});
  p.constraints = &cs;
  const FractionalSolution s = SolveNnls(p);
  EXPECT_NEAR(s.x[0] + s.x[2], 5.0, 1e-6);
  EXPECT_NEAR(s.x[1] + s.x[3], 5.0, 1e-6);
  std::vector<oracle::LsqTerm> terms;
  for (const auto& r : p.rows) {
    terms.push_back({{r.vars.begin(), r.vars.end()}, r.target, r.weight});
  }
  // Equality rows solve for vars 2 and 3; the grid covers vars 0 and 1.
  const double grid = oracle::GridNnls(
      4, terms, {{{0, 2}, {}, 5, 5}, {{1, 3}, {}, 5, 5}}, 5.0, 0.005);
  EXPECT_LE(s.objective, grid + 1e-9);
  EXPECT_NEAR(s.objective, grid, 1e-4);
}

TEST(NnlsTest, InequalityBoundsAreRespected) {
  NnlsProblem p;
  p.num_vars = 2;
  p.rows = {{{0}, 10.0, 1.0}, {{1}, 10.0, 1.0}};
  ConstraintSet cs(2);
  cs.constraints.push_back(
      {ConstraintFamily::kBound, "cap", {{0, 1}, {1, 1}}, 0, 8});
  p.constraints = &cs;
  const FractionalSolution s = SolveNnls(p);
  EXPECT_NEAR(s.x[0], 4.0, 1e-5);
  EXPECT_NEAR(s.x[1], 4.0, 1e-5);
}

TEST(NnlsTest, RedundantEqualitiesDoNotStall) {
  // Parent-child rows whose sum repeats a child invariant.
  NnlsProblem p;
  p.num_vars = 4;
  p.rows = {{{0}, 1.3, 1.0}, {{1}, 2.2, 1.0}, {{2}, 0.4, 1.0}, {{3}, 3.9, 1.0}};
  ConstraintSet cs(4);
  cs.constraints.push_back({ConstraintFamily::kParentChild, "pc:0",
                            {{0, 1}, {2, 1}}, 2, 2});
  cs.constraints.push_back({ConstraintFamily::kParentChild, "pc:1",
                            {{1, 1}, {3, 1}}, 6, 6});
  cs.constraints.push_back({ConstraintFamily::kInvariant, "inv:a",
                            {{0, 1}, {1, 1}}, 3, 3});
  cs.constraints.push_back({ConstraintFamily::kInvariant, "inv:b",
                            {{2, 1}, {3, 1}}, 5, 5});
  p.constraints = &cs;
  const FractionalSolution s = SolveNnls(p);
  EXPECT_NEAR(s.x[0] + s.x[1], 3.0, 1e-6);
  EXPECT_NEAR(s.x[2] + s.x[3], 5.0, 1e-6);
  EXPECT_NEAR(s.x[0] + s.x[2], 2.0, 1e-6);
}

TEST(NnlsTest, InconsistentEqualitiesAreReported) {
  NnlsProblem p;
  p.num_vars = 2;
  p.rows = {{{0}, 1.0, 1.0}, {{1}, 1.0, 1.0}};
  ConstraintSet cs(2);
  cs.constraints.push_back(
      {ConstraintFamily::kInvariant, "a", {{0, 1}, {1, 1}}, 3, 3});
  cs.constraints.push_back(
      {ConstraintFamily::kInvariant, "b", {{0, 1}, {1, 1}}, 4, 4});
  p.constraints = &cs;
  EXPECT_THROW(SolveNnls(p), SolverError);
}

TEST(NnlsTest, UntouchedCellsAreReported) {
  NnlsProblem p;
  p.num_vars = 3;
  p.rows = {{{0}, 2.0, 1.0}};
  const FractionalSolution s = SolveNnls(p);
  EXPECT_EQ(s.unidentified, (std::vector<std::int64_t>{1, 2}));
  EXPECT_EQ(s.x[1], 0.0);
}

// Property: objective within 1e-4 relative of the support-enumeration
// optimum, equalities met, x >= 0, and the same answer on a rerun.
TEST(NnlsProperty, MatchesSupportEnumeration) {
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 60; ++trial) {
    auto inst = testing_instances::RandomNnlsInstance(gen);
    inst.problem.constraints = &inst.constraints;
    const FractionalSolution s = SolveNnls(inst.problem);
    const auto best = oracle::SupportEnumerationNnls(
        static_cast<int>(inst.problem.num_vars), inst.terms, inst.equalities,
        nullptr);
    ASSERT_TRUE(best.has_value()) << trial;
    EXPECT_LE(std::abs(s.objective - *best), 1e-4 * std::max(1.0, *best))
        << trial;
    for (double v : s.x) EXPECT_GE(v, 0.0);
    for (const auto& c : inst.constraints.constraints) {
      EXPECT_NEAR(c.Evaluate(std::span<const double>(s.x)),
                  static_cast<double>(c.lo), 1e-5);
    }
    EXPECT_EQ(SolveNnls(inst.problem).x, s.x);
  }
}

}  // namespace
}  // namespace topdown
