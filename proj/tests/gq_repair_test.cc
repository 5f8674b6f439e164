#include <random>

#include <gtest/gtest.h>

#include "topdown/gq_repair.h"

namespace topdown {
namespace {

class GqRepairTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::vector<AttributeDef> attrs = {
        {"RELGQ", {"hh", "gq301", "gq701", "gq900"}},
        MakeRangeAttribute("AGE", 0, 30)};
    schema_ = std::make_shared<Schema>(
        attrs, MakeRangeRules(attrs, "RELGQ", "AGE",
                              {{"gq301", {20, 30}}, {"gq900", {16, 25}}}));
    // Household / institutional / noninstitutional by voting age.
    AttributeGrouping rel4{{0, 1, 2, 2}, {"hh", "inst", "noninst"}};
    AttributeGrouping voting{{}, {"under_18", "18_plus"}};
    for (int a = 0; a <= 30; ++a) voting.group_of_level.push_back(a < 18 ? 0 : 1);
    p1_ = std::make_unique<QueryGroup>("p1", schema_,
                                       std::vector<AttributeGrouping>{rel4, voting});
    config_.gq_codes = {{"gq301", 301}, {"gq701", 701}, {"gq900", 900}};
    config_.strict_levels = {"block"};
  }

  std::int64_t Cell(const std::string& rel, int age) const {
    const int levels[] = {schema_->attribute(0).LevelIndex(rel), age};
    return schema_->CellIndex(levels);
  }

  GqRepairer Repairer() const { return GqRepairer(schema_, config_, {*p1_}); }

  std::vector<GqBound> OneFacility900() const {
    return {{"u", 301, 0, 0}, {"u", 701, 0, 0}, {"u", 900, 1, kMaxGqResidents}};
  }

  std::shared_ptr<const Schema> schema_;
  std::unique_ptr<QueryGroup> p1_;
  GqRepairConfig config_;
};

TEST(GqTypeTest, MajorTypes) {
  EXPECT_EQ(MajorGqType(301), 3);
  EXPECT_EQ(MajorGqType(101), 1);
  EXPECT_EQ(MajorGqType(701), 7);
  EXPECT_EQ(MajorGqType(900), 7);
}

TEST_F(GqRepairTest, HighLevelMoveChangesTypeAndAgeWithinVotingGroup) {
  const GqRepairer repairer = Repairer();
  int sixteen = 0;
  const int runs = 2000;
  for (int seed = 0; seed < runs; ++seed) {
    std::vector<std::int64_t> counts(schema_->cell_count(), 0);
    counts[Cell("gq701", 10)] = 1;
    KeyedRng rng = RepairRng(seed, "u");
    const RepairOutcome out =
        repairer.RepairUnit(&counts, OneFacility900(), false, rng, "u");
    EXPECT_EQ(out.moves, 1);
    EXPECT_TRUE(out.residuals.empty());
    const bool at16 = counts[Cell("gq900", 16)] == 1;
    const bool at17 = counts[Cell("gq900", 17)] == 1;
    ASSERT_TRUE(at16 != at17) << seed;
    sixteen += at16;
  }
  // Binomial(2000, 1/2): 5 standard deviations is about 112.
  EXPECT_NEAR(sixteen, runs / 2, 112);
}

TEST_F(GqRepairTest, BlockLevelRepairLeavesHistogramUnchanged) {
  std::vector<std::int64_t> counts(schema_->cell_count(), 0);
  counts[Cell("gq701", 10)] = 1;
  const auto before = counts;
  KeyedRng rng = RepairRng(1, "u");
  const RepairOutcome out =
      Repairer().RepairUnit(&counts, OneFacility900(), true, rng, "u");
  EXPECT_EQ(counts, before);
  EXPECT_EQ(out.moves, 0);
  ASSERT_EQ(out.residuals.size(), 2u);
  EXPECT_EQ(out.residuals[0].code, 701);
  EXPECT_EQ(out.residuals[1].code, 900);
}

TEST_F(GqRepairTest, AgePreservingMovesArePreferred) {
  std::vector<std::int64_t> counts(schema_->cell_count(), 0);
  counts[Cell("gq701", 20)] = 1;
  const auto bounds = OneFacility900();
  std::map<int, std::pair<std::int64_t, std::int64_t>> by_code;
  for (const auto& b : bounds) by_code[b.code] = {b.lower, b.upper};
  const auto pairs = Repairer().EnumerateMovePairs(counts, 701, by_code, false);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0], (MovePair{Cell("gq701", 20), Cell("gq900", 20), true}));
}

TEST_F(GqRepairTest, NoMoveAcrossMajorTypes) {
  // Institutional mass cannot be moved into a noninstitutional facility.
  std::vector<std::int64_t> counts(schema_->cell_count(), 0);
  counts[Cell("gq301", 25)] = 2;
  KeyedRng rng = RepairRng(0, "u");
  const RepairOutcome out =
      Repairer().RepairUnit(&counts, OneFacility900(), false, rng, "u");
  EXPECT_EQ(counts[Cell("gq301", 25)], 2);
  EXPECT_EQ(out.residuals.size(), 2u);
}

// Property: repair keeps the preserved query, the total and validity, and
// never moves a count outside the bounds it started inside.
TEST_F(GqRepairTest, RepairPreservesPriorReleaseAndValidity) {
  const GqRepairer repairer = Repairer();
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::int64_t> counts(schema_->cell_count(), 0);
    for (std::int64_t c = 0; c < schema_->cell_count(); ++c) {
      if (schema_->IsValid(c) && gen() % 5 == 0) counts[c] = gen() % 3;
    }
    std::vector<GqBound> bounds;
    for (int code : {301, 701, 900}) {
      const std::int64_t n = gen() % 2;
      bounds.push_back({"u", code, n, n * 3});
    }
    const auto before = counts;
    std::vector<bool> inside;
    for (const auto& b : bounds) {
      const auto n = repairer.GqCount(counts, b.code);
      inside.push_back(n >= b.lower && n <= b.upper);
    }
    KeyedRng rng = RepairRng(trial, "u");
    const bool strict = trial % 2 == 0;
    repairer.RepairUnit(&counts, bounds, strict, rng, "u");
    const Histogram hb(schema_, before), ha(schema_, counts);
    EXPECT_EQ(EvaluateQuery(*p1_, ha), EvaluateQuery(*p1_, hb));
    for (std::int64_t c = 0; c < schema_->cell_count(); ++c) {
      EXPECT_GE(counts[c], 0);
      if (!schema_->IsValid(c)) EXPECT_EQ(counts[c], 0);
    }
    if (strict) {
      // Only RELGQ changes: the age marginal is untouched.
      const QueryGroup age = QueryGroup::Marginal("age", schema_, {"AGE"});
      EXPECT_EQ(EvaluateQuery(age, ha), EvaluateQuery(age, hb));
    }
    for (std::size_t i = 0; i < bounds.size(); ++i) {
      const auto n = repairer.GqCount(counts, bounds[i].code);
      if (inside[i]) {
        EXPECT_TRUE(n >= bounds[i].lower && n <= bounds[i].upper) << trial;
      }
    }
  }
}

TEST(GqBoundsTest, AggregateFacilitiesUpTheSpine) {
  const Spine spine = BuildSpine({"111", "112", "121"}, {1, 2, 3},
                                 {"US", "state", "block"});
  const auto bounds =
      BuildGqBounds(spine, {{"111", {{900, 1}}}, {"121", {{900, 2}, {701, 1}}}},
                    {701, 900});
  auto find = [&](const std::string& g, int code) {
    for (const auto& b : bounds) {
      if (b.geocode == g && b.code == code) return b;
    }
    return GqBound{};
  };
  EXPECT_EQ(find("1", 900).lower, 3);
  EXPECT_EQ(find("1", 900).upper, 3 * kMaxGqResidents);
  EXPECT_EQ(find("11", 701).lower, 0);
  EXPECT_EQ(find("12", 701).upper, kMaxGqResidents);
  EXPECT_EQ(bounds.size(), 6u * 2u);
  const auto back = ParseGqBounds(SerializeGqBounds(bounds), "b");
  ASSERT_EQ(back.size(), bounds.size());
  EXPECT_EQ(back[3].geocode, bounds[3].geocode);
  EXPECT_EQ(back[3].upper, bounds[3].upper);
}

}  // namespace
}  // namespace topdown
