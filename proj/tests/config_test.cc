#include <chrono>
#include <string>

#include <gtest/gtest.h>

#include "topdown/config.h"
#include "topdown/errors.h"
#include "topdown/pipeline.h"
#include "topdown/rational.h"

namespace topdown {
namespace {

const std::string kPresets = std::string(TOPDOWN_SOURCE_DIR) + "/presets/";

std::string ErrorOf(const std::string& text) {
  try {
    ParseConfig(text);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

constexpr const char* kSmall = R"({
  "format_version": 1,
  "schema": {"attributes": [{"name": "A", "levels": ["x", "y"]},
                            {"name": "AGE", "range": [0, 3]}]},
  "queries": [{"id": "total", "attributes": {}},
              {"id": "detailed", "attributes": {"A": "*", "AGE": "*"}}],
  "spine": {"levels": ["US", "block"], "prefix_lengths": [1, 2]},
  "strategy": {"denominator": 10,
               "allocations": {"total": {"US": 1, "block": 1},
                               "detailed": {"US": 2, "block": 2}}},
  "pass_plan": ["detailed"]
})";

TEST(ConfigTest, SmallConfigParses) {
  const RunConfig c = ParseConfig(kSmall);
  EXPECT_EQ(c.schema->cell_count(), 8);
  EXPECT_EQ(c.queries.size(), 2u);
  EXPECT_EQ(TotalRho(c.strategy), MakeRational(3, 5));
  EXPECT_EQ(BuildCatalog(c).at("detailed").group.output_cells(), 8);
}

TEST(ConfigTest, EmptyConfigListsEveryMissingSection) {
  const std::string msg = ErrorOf("{}");
  for (const char* s : {"format_version", "schema", "queries", "spine",
                        "strategy", "pass_plan"}) {
    EXPECT_NE(msg.find(std::string("missing section '") + s + "'"),
              std::string::npos)
        << msg;
  }
}

TEST(ConfigTest, UnknownKeysAreRejected) {
  std::string text = kSmall;
  text.insert(1, "\"colour\": 1,");
  EXPECT_NE(ErrorOf(text).find("unknown key"), std::string::npos);
}

TEST(ConfigTest, UndeclaredQueryIdIsNamed) {
  std::string text = kSmall;
  text.replace(text.find("[\"detailed\"]"), 12, "[\"X\", \"detailed\"]");
  EXPECT_NE(ErrorOf(text).find("undeclared query id 'X'"), std::string::npos);
}

TEST(ConfigTest, InvalidJsonIsAValidationError) {
  EXPECT_NE(ErrorOf("{").find("not valid JSON"), std::string::npos);
  EXPECT_NE(ErrorOf("[]").find("JSON object"), std::string::npos);
}

TEST(ConfigTest, ToyPresetValidates) {
  const RunConfig c = LoadConfig(kPresets + "toy.json");
  EXPECT_TRUE(c.gq_repair_enabled);
  EXPECT_EQ(c.ci_targets.size(), 5u);
  EXPECT_EQ(c.pass_plan.query_ids.back(), "detailed");
  EXPECT_EQ(TotalRho(c.strategy), MakeRational(2, 1));
}

TEST(ConfigTest, ProductionPresetsValidateQuickly) {
  const auto start = std::chrono::steady_clock::now();
  const RunConfig dhch = LoadConfig(kPresets + "dhch.json");
  const RunConfig dhcp = LoadConfig(kPresets + "dhcp.json");
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - start)
                          .count();
  EXPECT_LT(secs, 1.0);
  EXPECT_EQ(TotalRho(dhch.strategy), MakeRational(15401, 2000));
  EXPECT_EQ(TotalRho(dhcp.strategy), MakeRational(24811, 5000));
  EXPECT_TRUE(dhch.dual());
  bool hhtype = false;
  for (const auto& n : dhch.notes) {
    hhtype = hhtype || n.rfind("HHTYPE: 522 valid levels", 0) == 0;
  }
  EXPECT_TRUE(hhtype);
  EXPECT_NE(ValidationReport(dhch).find("total rho = 7.7005"),
            std::string::npos);
}

}  // namespace
}  // namespace topdown
