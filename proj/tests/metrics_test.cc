#include <cmath>

#include <gtest/gtest.h>

#include "topdown/discrete_gaussian.h"
#include "topdown/errors.h"
#include "topdown/metrics.h"

namespace topdown {
namespace {

constexpr double kZ90 = 1.6448536269514722;

class MetricsTest : public ::testing::Test {
 protected:
  void SetUp() override {
    schema_ = std::make_shared<Schema>(std::vector<AttributeDef>{
        {"A", {"0", "1"}}, {"B", {"0", "1"}}});
    universe_ = Universe::Single(schema_);
    catalog_.Add(MakeFlatQuery(universe_, 0, QueryGroup::Total("total", schema_)));
    catalog_.Add(MakeFlatQuery(universe_, 0,
                               QueryGroup::Marginal("a", schema_, {"A"})));
    catalog_.Add(MakeFlatQuery(universe_, 0,
                               QueryGroup::Identity("detailed", schema_)));
    spine_ = std::make_unique<Spine>(BuildSpine(
        {"11", "12", "13", "14"}, {1, 2}, {"US", "block"}));
  }

  std::shared_ptr<const Schema> schema_;
  Universe universe_;
  QueryCatalog catalog_;
  std::unique_ptr<Spine> spine_;
};

TEST_F(MetricsTest, MaeExamples) {
  const auto& total = catalog_.at("total");
  CountMap truth = {{"11", {1, 1, 1, 1}}, {"12", {0, 0, 0, 0}},
                    {"13", {2, 0, 0, 0}}, {"14", {5, 5, 0, 0}}};
  EXPECT_EQ(Mae(truth, truth, spine_->Blocks(), total), 0.0);
  CountMap est = truth;
  est["12"][0] = 1;   // error 1
  est["13"][1] = 2;   // error 2
  est["14"][0] = 0;   // error 5
  EXPECT_DOUBLE_EQ(Mae(est, truth, spine_->Blocks(), total), 2.0);
  EXPECT_DOUBLE_EQ(Mae(truth, est, spine_->Blocks(), total), 2.0);
  EXPECT_DOUBLE_EQ(Mae(est, truth, {"14"}, total), 5.0);
  // Relabelling units does not change the result.
  EXPECT_DOUBLE_EQ(Mae(est, truth, {"14", "11", "13", "12"}, total), 2.0);
  // Cell selection on the A marginal: every change above is in row 0.
  EXPECT_EQ(TotalAbsoluteError(est, truth, spine_->Blocks(), catalog_.at("a"), 0),
            8);
  EXPECT_EQ(TotalAbsoluteError(est, truth, spine_->Blocks(), catalog_.at("a"), 1),
            0);
  EXPECT_THROW(Mae(est, truth, {"99"}, total), DataError);
}

TEST_F(MetricsTest, ReleaseAtHalfToleranceOneUnitIsUsuallyExact) {
  CountMap truth = {{"11", {1, 1, 1, 1}}, {"12", {1, 0, 0, 0}},
                    {"13", {0, 0, 0, 0}}, {"14", {0, 0, 0, 0}}};
  truth["1"] = {2, 1, 1, 1};
  CountMap est = truth;
  est["1"] = {3, 1, 1, 1};
  MetricRequest req{"total", "US", -1, 0.5, 0.9};
  int exact = 0;
  const int runs = 2000;
  Rho rho;
  for (int seed = 0; seed < runs; ++seed) {
    Accountant acc;
    KeyedRng rng = MetricRng(seed, 0);
    const NoisyMae m =
        ReleaseNoisyMae(req, est, truth, *spine_, catalog_, rng, &acc);
    EXPECT_EQ(m.true_mae, 1.0);
    EXPECT_EQ(m.units, 1);
    exact += m.released == m.true_mae;
    ASSERT_EQ(acc.ledger().size(), 1u);
    EXPECT_EQ(acc.ledger()[0].unit_class, "release");
    EXPECT_EQ(acc.ReleaseTotal(), m.rho);
    rho = m.rho;
  }
  EXPECT_GE(DgCentralMass(0, 1.0 / ToDouble(rho)), 0.9);
  // Binomial slack around the calibrated coverage.
  EXPECT_GE(exact, 0.9 * runs - 5 * std::sqrt(runs * 0.09));
}

TEST_F(MetricsTest, InvalidRequestsAreRejected) {
  EXPECT_THROW(ValidateMetricRequest({"total", "US", -1, 0.0, 0.9}),
               ValidationError);
  EXPECT_THROW(ValidateMetricRequest({"total", "US", -1, 0.5, 1.0}),
               ValidationError);
  EXPECT_NO_THROW(ValidateMetricRequest({"total", "US", -1, 0.15, 0.9}));
}

TEST_F(MetricsTest, CiOfADirectMeasurement) {
  const Spine single = BuildSpine({"1"}, {1}, {"US"});
  MeasurementIndex idx;
  idx["1"]["detailed"] = {{4, 7, 1, 0}, MakeRational(9, 1)};
  const ConfidenceInterval ci = CiFromNmf(idx, single, universe_, catalog_,
                                          {"1", "detailed", 1}, 0.9);
  EXPECT_DOUBLE_EQ(ci.estimate, 7.0);
  EXPECT_DOUBLE_EQ(ci.variance, 9.0);
  EXPECT_NEAR(ci.half_width, kZ90 * 3.0, 1e-9);
}

TEST_F(MetricsTest, CiOfASumAddsVariancesAndCombinesDecompositions) {
  const Spine single = BuildSpine({"1"}, {1}, {"US"});
  MeasurementIndex idx;
  idx["1"]["detailed"] = {{4, 7, 1, 0}, MakeRational(2, 1)};
  // A row 0 covers detailed cells 0 and 1.
  auto ci = CiFromNmf(idx, single, universe_, catalog_, {"1", "a", 0}, 0.9);
  EXPECT_DOUBLE_EQ(ci.estimate, 11.0);
  EXPECT_DOUBLE_EQ(ci.variance, 4.0);
  // With a direct measurement of the same row, inverse-variance weighting.
  idx["1"]["a"] = {{14, 2}, MakeRational(4, 1)};
  ci = CiFromNmf(idx, single, universe_, catalog_, {"1", "a", 0}, 0.9);
  EXPECT_DOUBLE_EQ(ci.variance, 2.0);
  EXPECT_DOUBLE_EQ(ci.estimate, (11.0 / 4 + 14.0 / 4) / (0.5));
  // Both "a" rows lie inside the total, so two decompositions combine.
  ci = CiFromNmf(idx, single, universe_, catalog_, {"1", "total", 0}, 0.9);
  EXPECT_NEAR(ci.variance, 1.0 / (1.0 / 8 + 1.0 / 8), 1e-12);
}

TEST_F(MetricsTest, CiUsesChildrenAndIsMonotoneInRho) {
  MeasurementIndex idx;
  for (const char* g : {"11", "12", "13", "14"}) {
    idx[g]["total"] = {{10}, MakeRational(5, 1)};
  }
  auto ci = CiFromNmf(idx, *spine_, universe_, catalog_, {"1", "total", 0}, 0.9);
  EXPECT_DOUBLE_EQ(ci.estimate, 40.0);
  EXPECT_DOUBLE_EQ(ci.variance, 20.0);
  const double wide = ci.half_width;
  idx["1"]["total"] = {{44}, MakeRational(20, 1)};
  ci = CiFromNmf(idx, *spine_, universe_, catalog_, {"1", "total", 0}, 0.9);
  EXPECT_DOUBLE_EQ(ci.variance, 10.0);
  EXPECT_LT(ci.half_width, wide);
  // Raising one child's rho (smaller sigma2) narrows the interval further.
  idx["11"]["total"].sigma2 = MakeRational(1, 1);
  const double narrower =
      CiFromNmf(idx, *spine_, universe_, catalog_, {"1", "total", 0}, 0.9)
          .half_width;
  EXPECT_LT(narrower, ci.half_width);
}

TEST_F(MetricsTest, UnsupportedTargetIsReported) {
  MeasurementIndex idx;
  for (const char* g : {"1", "11", "12", "13", "14"}) {
    idx[g]["total"] = {{10}, MakeRational(5, 1)};
  }
  try {
    CiFromNmf(idx, *spine_, universe_, catalog_, {"1", "detailed", 0}, 0.9);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("granular"), std::string::npos);
  }
}

}  // namespace
}  // namespace topdown
