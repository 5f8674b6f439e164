#include "topdown/config.h"

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

#include <json.hpp>

#include "topdown/csv.h"
#include "topdown/errors.h"

namespace topdown {

namespace {

using Json = nlohmann::ordered_json;

constexpr int kFormatVersion = 1;

void Fail(const std::string& where, const std::string& message) {
  throw ValidationError(where + ": " + message);
}

void CheckKeys(const Json& obj, std::initializer_list<const char*> allowed,
               const std::string& where) {
  if (!obj.is_object()) Fail(where, "expected an object");
  std::vector<std::string> unknown;
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) unknown.push_back("'" + item.key() + "'");
  }
  if (!unknown.empty()) {
    std::string joined;
    for (const auto& u : unknown) joined += (joined.empty() ? "" : ", ") + u;
    Fail(where, "unknown key(s) " + joined);
  }
}

const Json& Required(const Json& obj, const char* key,
                     const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) Fail(where, std::string("missing '") + key + "'");
  return *it;
}

std::string AsString(const Json& j, const std::string& where) {
  if (!j.is_string()) Fail(where, "expected a string");
  return j.get<std::string>();
}

std::string AsLabel(const Json& j, const std::string& where) {
  std::string s = AsString(j, where);
  if (s.empty() || s.find_first_of(",\n\r\"") != std::string::npos) {
    Fail(where, "label '" + s + "' is empty or contains a delimiter");
  }
  return s;
}

std::int64_t AsInt(const Json& j, const std::string& where) {
  if (!j.is_number_integer()) Fail(where, "expected an integer");
  return j.get<std::int64_t>();
}

double AsNumber(const Json& j, const std::string& where) {
  if (!j.is_number()) Fail(where, "expected a number");
  return j.get<double>();
}

const Json& AsArray(const Json& j, const std::string& where) {
  if (!j.is_array()) Fail(where, "expected an array");
  return j;
}

std::pair<int, int> AsRange(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) Fail(where, "expected [lo, hi]");
  const auto lo = AsInt(j[0], where);
  const auto hi = AsInt(j[1], where);
  if (lo > hi) Fail(where, "empty range");
  return {static_cast<int>(lo), static_cast<int>(hi)};
}

const AttributeDef* FindAttribute(const std::vector<AttributeDef>& attributes,
                                  const std::string& name) {
  for (const auto& a : attributes) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

// Level labels selected by a spec: a label list, {"range": [lo, hi]} over
// integer labels, or {"except": [labels]}.
std::vector<std::string> SelectLevels(const AttributeDef& attribute,
                                      const Json& spec,
                                      const std::string& where) {
  std::vector<std::string> out;
  auto require_level = [&](const std::string& label) {
    if (attribute.LevelIndex(label) < 0) {
      Fail(where, "unknown level '" + label + "' of " + attribute.name);
    }
  };
  if (spec.is_array()) {
    for (const auto& l : spec) {
      out.push_back(AsString(l, where));
      require_level(out.back());
    }
  } else if (spec.is_object() && spec.contains("range")) {
    CheckKeys(spec, {"range"}, where);
    const auto [lo, hi] = AsRange(spec["range"], where + ".range");
    for (const auto& label : attribute.levels) {
      std::int64_t v = 0;
      try {
        v = std::stoll(label);
      } catch (const std::exception&) {
        Fail(where, attribute.name + " does not have integer labels");
      }
      if (v >= lo && v <= hi) out.push_back(label);
    }
  } else if (spec.is_object() && spec.contains("except")) {
    CheckKeys(spec, {"except"}, where);
    std::set<std::string> drop;
    for (const auto& l : AsArray(spec["except"], where + ".except")) {
      drop.insert(AsString(l, where));
      require_level(AsString(l, where));
    }
    for (const auto& label : attribute.levels) {
      if (!drop.count(label)) out.push_back(label);
    }
  } else {
    Fail(where, "expected a label list, {\"range\"} or {\"except\"}");
  }
  if (out.empty()) Fail(where, "selects no levels of " + attribute.name);
  return out;
}

CellCondition ParseCondition(const std::vector<AttributeDef>& attributes,
                             const Json& j, const std::string& where) {
  if (!j.is_object()) Fail(where, "expected an object");
  LevelSpec spec;
  for (const auto& item : j.items()) {
    const AttributeDef* a = FindAttribute(attributes, item.key());
    if (a == nullptr) Fail(where, "unknown attribute '" + item.key() + "'");
    spec.emplace_back(item.key(),
                      SelectLevels(*a, item.value(), where + "." + item.key()));
  }
  return MakeCondition(attributes, spec);
}

ExclusionRule ParseRule(const std::vector<AttributeDef>& attributes,
                        const Json& j, const std::string& where) {
  CheckKeys(j, {"description", "when", "require"}, where);
  ExclusionRule rule;
  if (j.contains("description")) {
    rule.description = AsString(j["description"], where + ".description");
  }
  rule.when = ParseCondition(attributes, Required(j, "when", where),
                             where + ".when");
  if (j.contains("require")) {
    rule.require = ParseCondition(attributes, j["require"], where + ".require");
  }
  return rule;
}

AttributeDef ParseAttribute(const Json& j, const std::string& where,
                            std::vector<std::string>* notes) {
  CheckKeys(j, {"name", "levels", "range", "combined"}, where);
  const std::string name = AsLabel(Required(j, "name", where), where + ".name");
  const std::string at = where + "(" + name + ")";
  const int forms = static_cast<int>(j.contains("levels")) +
                    static_cast<int>(j.contains("range")) +
                    static_cast<int>(j.contains("combined"));
  if (forms != 1) Fail(at, "needs exactly one of levels, range, combined");
  if (j.contains("range")) {
    const auto [lo, hi] = AsRange(j["range"], at + ".range");
    return MakeRangeAttribute(name, lo, hi);
  }
  if (j.contains("levels")) {
    AttributeDef a;
    a.name = name;
    std::set<std::string> seen;
    for (const auto& l : AsArray(j["levels"], at + ".levels")) {
      a.levels.push_back(AsLabel(l, at + ".levels"));
      if (!seen.insert(a.levels.back()).second) {
        Fail(at, "duplicate level '" + a.levels.back() + "'");
      }
    }
    if (a.levels.empty()) Fail(at, "no levels");
    return a;
  }
  const Json& c = j["combined"];
  CheckKeys(c, {"components", "rules"}, at + ".combined");
  std::vector<AttributeDef> components;
  for (const auto& comp :
       AsArray(Required(c, "components", at + ".combined"), at)) {
    components.push_back(ParseAttribute(comp, at + ".components", notes));
  }
  std::vector<ExclusionRule> rules;
  if (c.contains("rules")) {
    for (const auto& r : AsArray(c["rules"], at + ".rules")) {
      rules.push_back(ParseRule(components, r, at + ".rules"));
    }
  }
  std::int64_t product = 1;
  for (const auto& comp : components) product *= comp.size();
  AttributeDef combined =
      BuildCombinedAttribute(name, std::move(components), rules);
  if (combined.levels.empty()) Fail(at, "every component tuple is excluded");
  notes->push_back(name + ": " + std::to_string(combined.size()) +
                   " valid levels of " + std::to_string(product) +
                   " component tuples");
  return combined;
}

std::shared_ptr<const Schema> ParseSchema(const Json& j,
                                          const std::string& where,
                                          std::vector<std::string>* notes) {
  CheckKeys(j, {"attributes", "structural_zeros", "age_ranges"}, where);
  std::vector<AttributeDef> attributes;
  std::set<std::string> names;
  for (const auto& a :
       AsArray(Required(j, "attributes", where), where + ".attributes")) {
    attributes.push_back(ParseAttribute(a, where + ".attributes", notes));
    if (!names.insert(attributes.back().name).second) {
      Fail(where, "duplicate attribute '" + attributes.back().name + "'");
    }
  }
  if (attributes.empty()) Fail(where, "no attributes");
  std::vector<ExclusionRule> rules;
  if (j.contains("structural_zeros")) {
    for (const auto& r :
         AsArray(j["structural_zeros"], where + ".structural_zeros")) {
      rules.push_back(ParseRule(attributes, r, where + ".structural_zeros"));
    }
  }
  if (j.contains("age_ranges")) {
    const std::string at = where + ".age_ranges";
    const Json& ar = j["age_ranges"];
    CheckKeys(ar, {"attribute", "range_attribute", "ranges"}, at);
    const std::string attr = AsString(Required(ar, "attribute", at), at);
    const std::string range_attr =
        AsString(Required(ar, "range_attribute", at), at);
    const Json& ranges = Required(ar, "ranges", at);
    if (!ranges.is_object()) Fail(at + ".ranges", "expected an object");
    std::vector<std::pair<std::string, std::pair<int, int>>> list;
    for (const auto& item : ranges.items()) {
      list.emplace_back(item.key(),
                        AsRange(item.value(), at + ".ranges." + item.key()));
    }
    for (auto& r : MakeRangeRules(attributes, attr, range_attr, list)) {
      rules.push_back(std::move(r));
    }
  }
  auto schema = std::make_shared<const Schema>(std::move(attributes),
                                               std::move(rules));
  if (schema->valid_count() == 0) Fail(where, "every cell is excluded");
  return schema;
}

// Partition of `attribute` defined by a recode declaration.
AttributeGrouping ParseRecode(const AttributeDef& attribute, const Json& j,
                              const std::string& where) {
  CheckKeys(j, {"attribute", "groups", "ranges", "components"}, where);
  const int forms = static_cast<int>(j.contains("groups")) +
                    static_cast<int>(j.contains("ranges")) +
                    static_cast<int>(j.contains("components"));
  if (forms != 1) Fail(where, "needs exactly one of groups, ranges, components");
  AttributeGrouping g;
  g.group_of_level.assign(attribute.size(), -1);
  auto assign = [&](int group, const std::vector<std::string>& labels) {
    for (const auto& label : labels) {
      int& slot = g.group_of_level[attribute.LevelIndex(label)];
      if (slot >= 0) Fail(where, "level '" + label + "' in two groups");
      slot = group;
    }
  };
  if (j.contains("groups") || j.contains("ranges")) {
    const bool ranges = j.contains("ranges");
    const Json& groups = ranges ? j["ranges"] : j["groups"];
    if (!groups.is_object()) Fail(where, "expected an object of groups");
    for (const auto& item : groups.items()) {
      const int id = g.group_count();
      g.group_labels.push_back(AsLabel(Json(item.key()), where));
      const std::string at = where + "." + item.key();
      assign(id, ranges ? SelectLevels(attribute, Json{{"range", item.value()}}, at)
                        : SelectLevels(attribute, item.value(), at));
    }
  } else {
    if (!attribute.is_combined()) {
      Fail(where, attribute.name + " is not a combined attribute");
    }
    // Per listed component: its index and a grouping of its levels.
    std::vector<std::pair<int, AttributeGrouping>> parts;
    for (const auto& entry : AsArray(j["components"], where + ".components")) {
      std::string cname;
      const Json* groups = nullptr;
      if (entry.is_string()) {
        cname = entry.get<std::string>();
      } else {
        CheckKeys(entry, {"component", "groups"}, where + ".components");
        cname = AsString(Required(entry, "component", where), where);
        if (entry.contains("groups")) groups = &entry["groups"];
      }
      int ci = -1;
      for (int i = 0; i < static_cast<int>(attribute.components.size()); ++i) {
        if (attribute.components[i].name == cname) ci = i;
      }
      if (ci < 0) Fail(where, "unknown component '" + cname + "'");
      const AttributeDef& comp = attribute.components[ci];
      parts.emplace_back(ci, groups == nullptr
                                 ? AttributeGrouping::Identity(comp)
                                 : ParseRecode(comp, Json{{"groups", *groups}},
                                               where + "." + cname));
    }
    std::map<std::vector<int>, std::vector<int>> levels_of_tuple;
    for (int l = 0; l < attribute.size(); ++l) {
      std::vector<int> key;
      for (const auto& [ci, cg] : parts) {
        key.push_back(cg.group_of_level[attribute.component_levels[l][ci]]);
      }
      levels_of_tuple[key].push_back(l);
    }
    for (const auto& [key, levels] : levels_of_tuple) {
      std::string label;
      for (std::size_t i = 0; i < key.size(); ++i) {
        label += (i ? "/" : "") + parts[i].second.group_labels[key[i]];
      }
      for (int l : levels) g.group_of_level[l] = g.group_count();
      g.group_labels.push_back(label);
    }
  }
  for (int l = 0; l < attribute.size(); ++l) {
    if (g.group_of_level[l] < 0) {
      Fail(where, "level '" + attribute.levels[l] + "' is in no group");
    }
  }
  return g;
}

QueryDecl ParseQuery(const Json& j, const std::string& where,
                     const RunConfig& config, const Json& recodes) {
  CheckKeys(j, {"id", "histogram", "attributes", "cells"}, where);
  const std::string id = AsLabel(Required(j, "id", where), where + ".id");
  const std::string at = where + "(" + id + ")";
  QueryDecl decl{QueryGroup::Total(id, config.schema), 0};
  std::shared_ptr<const Schema> schema = config.schema;
  if (j.contains("histogram")) {
    const std::string h = AsString(j["histogram"], at + ".histogram");
    if (h == "units") {
      if (!config.dual()) Fail(at, "histogram 'units' needs units_schema");
      decl.component = 1;
      schema = config.units_schema;
    } else if (h != "main") {
      Fail(at, "histogram must be 'main' or 'units'");
    }
  }
  const Json& attrs = Required(j, "attributes", at);
  if (attrs.is_string()) {
    if (attrs.get<std::string>() != "*") Fail(at, "attributes must be \"*\"");
    decl.group = QueryGroup::Identity(id, schema);
  } else {
    if (!attrs.is_object()) Fail(at, "attributes must be \"*\" or an object");
    std::vector<AttributeGrouping> groupings;
    for (const auto& a : schema->attributes()) {
      groupings.push_back(AttributeGrouping::Total(a));
    }
    for (const auto& item : attrs.items()) {
      const int ai = schema->AttributeIndex(item.key());
      if (ai < 0) Fail(at, "unknown attribute '" + item.key() + "'");
      const std::string r = AsString(item.value(), at + "." + item.key());
      const AttributeDef& attribute = schema->attribute(ai);
      if (r == "*") {
        groupings[ai] = AttributeGrouping::Identity(attribute);
        continue;
      }
      auto rit = recodes.find(r);
      if (rit == recodes.end()) Fail(at, "unknown recode '" + r + "'");
      const std::string target =
          AsString(Required(*rit, "attribute", "recodes." + r), "recodes." + r);
      if (target != attribute.name) {
        Fail(at, "recode '" + r + "' applies to " + target + ", not " +
                     attribute.name);
      }
      groupings[ai] = ParseRecode(attribute, *rit, "recodes." + r);
    }
    decl.group = QueryGroup(id, schema, std::move(groupings));
  }
  if (j.contains("cells")) {
    const std::int64_t expected = AsInt(j["cells"], at + ".cells");
    if (expected != decl.group.output_cells()) {
      Fail(at, "declares " + std::to_string(expected) + " cells but has " +
                   std::to_string(decl.group.output_cells()));
    }
  }
  return decl;
}

int LevelOrFail(const RunConfig& config, const std::string& level,
                const std::string& where) {
  for (std::size_t i = 0; i < config.spine_levels.size(); ++i) {
    if (config.spine_levels[i] == level) return static_cast<int>(i);
  }
  Fail(where, "unknown level '" + level + "'");
  return -1;
}

const QueryDecl& QueryOrFail(const RunConfig& config, const std::string& id,
                             const std::string& where) {
  const QueryDecl* q = config.FindQuery(id);
  if (q == nullptr) Fail(where, "undeclared query id '" + id + "'");
  return *q;
}

void ParseSpine(const Json& j, RunConfig* config) {
  const std::string where = "spine";
  CheckKeys(j, {"levels", "prefix_lengths"}, where);
  std::set<std::string> seen;
  for (const auto& l : AsArray(Required(j, "levels", where), where)) {
    config->spine_levels.push_back(AsLabel(l, where + ".levels"));
    if (!seen.insert(config->spine_levels.back()).second) {
      Fail(where, "duplicate level '" + config->spine_levels.back() + "'");
    }
  }
  for (const auto& p : AsArray(Required(j, "prefix_lengths", where), where)) {
    config->prefix_lengths.push_back(
        static_cast<int>(AsInt(p, where + ".prefix_lengths")));
  }
  if (config->spine_levels.size() < 2) Fail(where, "needs at least 2 levels");
  if (config->prefix_lengths.size() != config->spine_levels.size()) {
    Fail(where, "prefix_lengths and levels differ in length");
  }
  if (config->prefix_lengths[0] < 1) {
    Fail(where, "the root prefix length must be at least 1");
  }
  for (std::size_t i = 0; i < config->prefix_lengths.size(); ++i) {
    if (config->prefix_lengths[i] < 0 ||
        (i > 0 && config->prefix_lengths[i] <= config->prefix_lengths[i - 1])) {
      Fail(where, "prefix_lengths must be nonnegative and increasing");
    }
  }
}

void ParseStrategy(const Json& j, RunConfig* config) {
  const std::string where = "strategy";
  CheckKeys(j, {"denominator", "allocations"}, where);
  const std::int64_t den = AsInt(Required(j, "denominator", where),
                                 where + ".denominator");
  if (den <= 0) Fail(where, "denominator must be positive");
  const Json& alloc = Required(j, "allocations", where);
  if (!alloc.is_object()) Fail(where + ".allocations", "expected an object");
  bool any = false;
  for (const auto& q : alloc.items()) {
    const std::string at = where + ".allocations." + q.key();
    QueryOrFail(*config, q.key(), where);
    if (!q.value().is_object()) Fail(at, "expected {level: numerator}");
    for (const auto& l : q.value().items()) {
      LevelOrFail(*config, l.key(), at);
      const std::int64_t num = AsInt(l.value(), at + "." + l.key());
      if (num < 0) Fail(at + "." + l.key(), "negative allocation");
      if (num == 0) continue;
      config->strategy.Set(l.key(), q.key(), MakeRational(num, den));
      any = true;
    }
  }
  if (!any) Fail(where, "allocates no budget");
}

void ParseConstraints(const Json& j, RunConfig* config) {
  const std::string where = "constraints";
  CheckKeys(j, {"invariants", "prior_release", "linkage"}, where);
  if (j.contains("invariants")) {
    for (const auto& inv : AsArray(j["invariants"], where + ".invariants")) {
      const std::string at = where + ".invariants";
      CheckKeys(inv, {"query", "level", "cells"}, at);
      InvariantSpec spec;
      spec.query_id = AsString(Required(inv, "query", at), at);
      spec.level = AsString(Required(inv, "level", at), at);
      const QueryDecl& q = QueryOrFail(*config, spec.query_id, at);
      LevelOrFail(*config, spec.level, at);
      if (inv.contains("cells")) {
        for (const auto& c : AsArray(inv["cells"], at + ".cells")) {
          spec.cells.push_back(AsInt(c, at + ".cells"));
          if (spec.cells.back() < 0 ||
              spec.cells.back() >= q.group.output_cells()) {
            Fail(at, "cell out of range for '" + spec.query_id + "'");
          }
        }
      }
      config->constraints.invariants.push_back(std::move(spec));
    }
  }
  if (j.contains("prior_release")) {
    for (const auto& q : AsArray(j["prior_release"], where + ".prior_release")) {
      const std::string id = AsString(q, where + ".prior_release");
      if (QueryOrFail(*config, id, where + ".prior_release").component != 0) {
        Fail(where + ".prior_release", "'" + id + "' is not a main query");
      }
      config->constraints.prior_release_queries.push_back(id);
    }
  }
  if (j.contains("linkage")) {
    const std::string at = where + ".linkage";
    if (!config->dual()) Fail(at, "linkage needs units_schema");
    for (const auto& l : AsArray(j["linkage"], at)) {
      CheckKeys(l, {"name", "main_query", "main_cell", "units_query",
                    "units_cell"},
                at);
      LinkageSpec spec;
      spec.name = AsLabel(Required(l, "name", at), at);
      spec.main_query = AsString(Required(l, "main_query", at), at);
      spec.main_cell = AsInt(Required(l, "main_cell", at), at);
      spec.units_query = AsString(Required(l, "units_query", at), at);
      spec.units_cell = AsInt(Required(l, "units_cell", at), at);
      const QueryDecl& mq = QueryOrFail(*config, spec.main_query, at);
      const QueryDecl& uq = QueryOrFail(*config, spec.units_query, at);
      if (mq.component != 0 || uq.component != 1) {
        Fail(at + "(" + spec.name + ")",
             "main_query must be a main query and units_query a units query");
      }
      if (spec.main_cell < 0 || spec.main_cell >= mq.group.output_cells() ||
          spec.units_cell < 0 || spec.units_cell >= uq.group.output_cells()) {
        Fail(at + "(" + spec.name + ")", "cell out of range");
      }
      config->constraints.linkage.push_back(std::move(spec));
    }
  }
}

void ParsePassPlan(const Json& j, RunConfig* config) {
  const std::string where = "pass_plan";
  for (const auto& q : AsArray(j, where)) {
    const std::string id = AsString(q, where);
    QueryOrFail(*config, id, where);
    config->pass_plan.query_ids.push_back(id);
  }
  if (config->pass_plan.query_ids.empty()) Fail(where, "is empty");
  const QueryDecl& last =
      *config->FindQuery(config->pass_plan.query_ids.back());
  if (!last.group.is_identity() || last.component != 0) {
    Fail(where, "the last pass must be a detailed (identity) main query");
  }
}

void ParseGqRepair(const Json& j, RunConfig* config) {
  const std::string where = "gq_repair";
  CheckKeys(j, {"enabled", "relgq_attribute", "age_attribute", "gq_codes",
                "strict_levels"},
            where);
  auto& gq = config->gq_repair;
  config->gq_repair_enabled = true;
  if (j.contains("enabled")) {
    if (!j["enabled"].is_boolean()) Fail(where + ".enabled", "expected a boolean");
    config->gq_repair_enabled = j["enabled"].get<bool>();
  }
  if (config->gq_repair_enabled && config->dual()) {
    Fail(where, "GQ repair is not supported with dual histograms");
  }
  if (j.contains("relgq_attribute")) {
    gq.relgq_attribute = AsString(j["relgq_attribute"], where);
  }
  if (j.contains("age_attribute")) {
    gq.age_attribute = AsString(j["age_attribute"], where);
  }
  const int relgq = config->schema->AttributeIndex(gq.relgq_attribute);
  if (relgq < 0) Fail(where, "unknown attribute '" + gq.relgq_attribute + "'");
  if (config->schema->AttributeIndex(gq.age_attribute) < 0) {
    Fail(where, "unknown attribute '" + gq.age_attribute + "'");
  }
  const Json& codes = Required(j, "gq_codes", where);
  if (!codes.is_object() || codes.empty()) {
    Fail(where + ".gq_codes", "expected a non-empty object");
  }
  std::set<std::int64_t> seen;
  for (const auto& item : codes.items()) {
    if (config->schema->attribute(relgq).LevelIndex(item.key()) < 0) {
      Fail(where + ".gq_codes", "unknown level '" + item.key() + "'");
    }
    const std::int64_t code = AsInt(item.value(), where + ".gq_codes");
    if (code < 100 || code > 999 || !seen.insert(code).second) {
      Fail(where + ".gq_codes", "codes must be distinct 3-digit integers");
    }
    gq.gq_codes[item.key()] = static_cast<int>(code);
  }
  if (j.contains("strict_levels")) {
    for (const auto& l : AsArray(j["strict_levels"], where)) {
      const std::string level = AsString(l, where + ".strict_levels");
      LevelOrFail(*config, level, where + ".strict_levels");
      gq.strict_levels.insert(level);
    }
  }
}

void ParseMetrics(const Json& j, RunConfig* config) {
  const std::string where = "metrics";
  CheckKeys(j, {"budget_cap", "requests"}, where);
  if (j.contains("budget_cap")) {
    const std::string cap = j["budget_cap"].is_string()
                                ? j["budget_cap"].get<std::string>()
                                : j["budget_cap"].dump();
    try {
      config->metric_budget_cap = ParseRational(cap);
    } catch (const std::exception& e) {
      Fail(where + ".budget_cap", e.what());
    }
  }
  for (const auto& r : AsArray(Required(j, "requests", where), where)) {
    const std::string at = where + ".requests";
    CheckKeys(r, {"query", "level", "cell", "tolerance", "coverage"}, at);
    MetricRequest m;
    m.query_id = AsString(Required(r, "query", at), at);
    m.level = AsString(Required(r, "level", at), at);
    const QueryDecl& q = QueryOrFail(*config, m.query_id, at);
    LevelOrFail(*config, m.level, at);
    if (r.contains("cell")) m.cell = AsInt(r["cell"], at + ".cell");
    if (m.cell < -1 || m.cell >= q.group.output_cells()) {
      Fail(at, "cell out of range for '" + m.query_id + "'");
    }
    m.tolerance = AsNumber(Required(r, "tolerance", at), at + ".tolerance");
    m.coverage = AsNumber(Required(r, "coverage", at), at + ".coverage");
    ValidateMetricRequest(m);
    config->metrics.push_back(std::move(m));
  }
}

void ParseCi(const Json& j, RunConfig* config) {
  const std::string where = "ci";
  CheckKeys(j, {"confidence", "targets"}, where);
  if (j.contains("confidence")) {
    config->ci_confidence = AsNumber(j["confidence"], where + ".confidence");
  }
  if (!(config->ci_confidence > 0 && config->ci_confidence < 1)) {
    Fail(where, "confidence must be in (0, 1)");
  }
  for (const auto& t : AsArray(Required(j, "targets", where), where)) {
    const std::string at = where + ".targets";
    CheckKeys(t, {"geocode", "query", "cell"}, at);
    CiTarget target;
    target.geocode = AsString(Required(t, "geocode", at), at);
    target.query_id = AsString(Required(t, "query", at), at);
    target.cell = AsInt(Required(t, "cell", at), at);
    const QueryDecl& q = QueryOrFail(*config, target.query_id, at);
    if (target.cell < 0 || target.cell >= q.group.output_cells()) {
      Fail(at, "cell out of range for '" + target.query_id + "'");
    }
    config->ci_targets.push_back(std::move(target));
  }
}

void ParseGenerator(const Json& j, RunConfig* config) {
  const std::string where = "generator";
  CheckKeys(j, {"fanout", "records", "householder_level", "member_levels",
                "max_household_size", "gq_block_share", "max_gq_residents"},
            where);
  GeneratorConfig g;
  for (const auto& f : AsArray(Required(j, "fanout", where), where)) {
    g.fanout.push_back(static_cast<int>(AsInt(f, where + ".fanout")));
    if (g.fanout.back() < 1) Fail(where, "fanout entries must be positive");
  }
  if (g.fanout.size() + 1 != config->spine_levels.size()) {
    Fail(where, "fanout needs one entry per non-root spine level");
  }
  for (std::size_t i = 0; i < g.fanout.size(); ++i) {
    const int digits = config->prefix_lengths[i + 1] - config->prefix_lengths[i];
    std::int64_t room = 1;
    for (int d = 0; d < digits && room < 1000000; ++d) room *= 10;
    if (g.fanout[i] >= room) {
      Fail(where, "fanout does not fit the geocode prefix lengths");
    }
  }
  g.records = AsInt(Required(j, "records", where), where + ".records");
  if (g.records < 1) Fail(where, "records must be positive");
  const int relgq =
      config->schema->AttributeIndex(config->gq_repair.relgq_attribute);
  if (relgq < 0) Fail(where, "needs a gq_repair section naming the RELGQ attribute");
  const AttributeDef& rel = config->schema->attribute(relgq);
  g.householder_level = AsString(Required(j, "householder_level", where), where);
  if (rel.LevelIndex(g.householder_level) < 0) {
    Fail(where, "unknown level '" + g.householder_level + "'");
  }
  for (const auto& l : AsArray(Required(j, "member_levels", where), where)) {
    g.member_levels.push_back(AsString(l, where + ".member_levels"));
    if (rel.LevelIndex(g.member_levels.back()) < 0) {
      Fail(where, "unknown level '" + g.member_levels.back() + "'");
    }
  }
  if (j.contains("max_household_size")) {
    g.max_household_size = static_cast<int>(
        AsInt(j["max_household_size"], where + ".max_household_size"));
  }
  if (j.contains("gq_block_share")) {
    g.gq_block_share = AsNumber(j["gq_block_share"], where + ".gq_block_share");
  }
  if (j.contains("max_gq_residents")) {
    g.max_gq_residents = static_cast<int>(
        AsInt(j["max_gq_residents"], where + ".max_gq_residents"));
  }
  if (g.max_household_size < 1 || g.max_gq_residents < 1 ||
      g.gq_block_share < 0 || g.gq_block_share > 1) {
    Fail(where, "sizes must be positive and gq_block_share within [0, 1]");
  }
  config->generator = std::move(g);
}

void ParseInputs(const Json& j, const std::string& base, RunConfig* config) {
  const std::string where = "inputs";
  CheckKeys(j, {"microdata", "gq_facilities", "prior_release",
                "units_microdata"},
            where);
  auto resolve = [&](const char* key) -> std::string {
    if (!j.contains(key)) return "";
    std::filesystem::path p = AsString(j[key], where + "." + key);
    if (p.is_relative() && !base.empty()) p = std::filesystem::path(base) / p;
    return p.string();
  };
  config->inputs.microdata = resolve("microdata");
  config->inputs.gq_facilities = resolve("gq_facilities");
  config->inputs.prior_release = resolve("prior_release");
  config->inputs.units_microdata = resolve("units_microdata");
}

}  // namespace

const QueryDecl* RunConfig::FindQuery(const std::string& id) const {
  for (const auto& q : queries) {
    if (q.group.id() == id) return &q;
  }
  return nullptr;
}

RunConfig ParseConfig(const std::string& text, const std::string& path) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError("config is not valid JSON: " + std::string(e.what()));
  }
  if (!root.is_object()) throw ValidationError("config must be a JSON object");

  static const char* kRequired[] = {"format_version", "schema",  "queries",
                                    "spine",          "strategy", "pass_plan"};
  static const std::initializer_list<const char*> kKnown = {
      "format_version", "name",    "schema",  "units_schema", "recodes",
      "queries",        "spine",   "strategy", "constraints", "pass_plan",
      "gq_repair",      "metrics", "ci",      "generator",   "inputs",
      "seed",           "workers"};
  std::vector<std::string> problems;
  for (const char* key : kRequired) {
    if (!root.contains(key)) {
      problems.push_back(std::string("missing section '") + key + "'");
    }
  }
  try {
    CheckKeys(root, kKnown, "config");
  } catch (const ValidationError& e) {
    problems.push_back(e.what());
  }
  if (!problems.empty()) {
    std::string msg = "invalid config:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ValidationError(msg);
  }
  if (AsInt(root["format_version"], "format_version") != kFormatVersion) {
    Fail("format_version", "unsupported version (expected " +
                               std::to_string(kFormatVersion) + ")");
  }

  RunConfig config;
  config.path = path;
  config.digest = Sha256Hex(text);
  config.name = root.contains("name") ? AsString(root["name"], "name") : "run";
  config.schema = ParseSchema(root["schema"], "schema", &config.notes);
  config.universe = Universe::Single(config.schema, "main");
  if (root.contains("units_schema")) {
    config.units_schema =
        ParseSchema(root["units_schema"], "units_schema", &config.notes);
    config.universe.AddComponent("units", config.units_schema);
  }
  const Json recodes = root.contains("recodes") ? root["recodes"] : Json::object();
  if (!recodes.is_object()) Fail("recodes", "expected an object");
  for (const auto& q : AsArray(root["queries"], "queries")) {
    QueryDecl decl = ParseQuery(q, "queries", config, recodes);
    if (config.FindQuery(decl.group.id()) != nullptr) {
      Fail("queries", "duplicate query id '" + decl.group.id() + "'");
    }
    config.queries.push_back(std::move(decl));
  }
  if (config.queries.empty()) Fail("queries", "no queries declared");
  ParseSpine(root["spine"], &config);
  ParseStrategy(root["strategy"], &config);
  if (root.contains("constraints")) ParseConstraints(root["constraints"], &config);
  ParsePassPlan(root["pass_plan"], &config);
  if (root.contains("gq_repair")) ParseGqRepair(root["gq_repair"], &config);
  if (root.contains("metrics")) ParseMetrics(root["metrics"], &config);
  if (root.contains("ci")) ParseCi(root["ci"], &config);
  if (root.contains("generator")) ParseGenerator(root["generator"], &config);
  const std::string base =
      path.empty() ? "" : std::filesystem::path(path).parent_path().string();
  if (root.contains("inputs")) ParseInputs(root["inputs"], base, &config);
  if (root.contains("seed")) {
    const std::int64_t seed = AsInt(root["seed"], "seed");
    if (seed < 0) Fail("seed", "must be nonnegative");
    config.seed = static_cast<std::uint64_t>(seed);
  }
  if (root.contains("workers")) {
    config.workers = static_cast<int>(AsInt(root["workers"], "workers"));
    if (config.workers < 1) Fail("workers", "must be at least 1");
  }
  return config;
}

RunConfig LoadConfig(const std::string& path) {
  return ParseConfig(ReadFile(path), path);
}

QueryCatalog BuildCatalog(const RunConfig& config) {
  QueryCatalog catalog;
  for (const auto& q : config.queries) {
    catalog.Add(MakeFlatQuery(config.universe, q.component, q.group));
  }
  return catalog;
}

}  // namespace topdown
