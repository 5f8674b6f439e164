#ifndef TOPDOWN_CONFIG_H_
#define TOPDOWN_CONFIG_H_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "topdown/constraints.h"
#include "topdown/gq_repair.h"
#include "topdown/metrics.h"
#include "topdown/query.h"
#include "topdown/rational.h"
#include "topdown/schema.h"
#include "topdown/strategy.h"
#include "topdown/topdown.h"
#include "topdown/universe.h"

namespace topdown {

struct QueryDecl {
  QueryGroup group;
  int component = 0;  // 0 = main histogram, 1 = units histogram
};

struct GeneratorConfig {
  std::vector<int> fanout;  // children per unit, root level first
  std::int64_t records = 0;
  std::string householder_level;
  std::vector<std::string> member_levels;
  int max_household_size = 5;
  double gq_block_share = 0.3;  // probability a block has a GQ facility
  int max_gq_residents = 12;
};

struct InputPaths {
  std::string microdata;
  std::string gq_facilities;
  std::string prior_release;
  std::string units_microdata;  // dual mode
};

struct RunConfig {
  std::string name;
  std::string path;    // config file, if loaded from disk
  std::string digest;  // SHA-256 of the config text

  std::shared_ptr<const Schema> schema;
  std::shared_ptr<const Schema> units_schema;  // dual mode only
  Universe universe;
  std::vector<QueryDecl> queries;

  std::vector<std::string> spine_levels;
  std::vector<int> prefix_lengths;

  StrategyTable strategy;
  ConstraintConfig constraints;
  PassPlan pass_plan;

  bool gq_repair_enabled = false;
  GqRepairConfig gq_repair;

  std::vector<MetricRequest> metrics;
  std::optional<Rho> metric_budget_cap;

  double ci_confidence = 0.9;
  std::vector<CiTarget> ci_targets;

  std::optional<GeneratorConfig> generator;
  InputPaths inputs;  // resolved against the config directory; may be empty

  std::uint64_t seed = 0;
  int workers = 1;

  // Human-readable facts recorded in manifests (e.g. valid combined-level
  // counts).
  std::vector<std::string> notes;

  bool dual() const { return units_schema != nullptr; }
  const QueryDecl* FindQuery(const std::string& id) const;
};

// Parses and fully validates a configuration. Every problem found is listed
// in the thrown ValidationError.
RunConfig ParseConfig(const std::string& text, const std::string& path = "");
RunConfig LoadConfig(const std::string& path);

// Materializes every declared query against the universe.
QueryCatalog BuildCatalog(const RunConfig& config);

}  // namespace topdown

#endif  // TOPDOWN_CONFIG_H_
