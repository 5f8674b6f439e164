#include "topdown/schema.h"

#include <charconv>
#include <limits>
#include <set>

#include "topdown/errors.h"

namespace topdown {
namespace {

int ParseIntLabel(const std::string& label, const std::string& attribute) {
  int value = 0;
  const char* end = label.data() + label.size();
  auto [ptr, ec] = std::from_chars(label.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ValidationError("attribute " + attribute +
                          " has non-integer level '" + label + "'");
  }
  return value;
}

int FindAttribute(const std::vector<AttributeDef>& attributes,
                  std::string_view name) {
  for (std::size_t i = 0; i < attributes.size(); ++i) {
    if (attributes[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

// Odometer over the cross product, last attribute fastest.
bool Advance(const std::vector<AttributeDef>& attributes,
             std::vector<int>& levels) {
  for (int a = static_cast<int>(levels.size()) - 1; a >= 0; --a) {
    if (++levels[a] < attributes[a].size()) return true;
    levels[a] = 0;
  }
  return false;
}

void CheckAttributes(const std::vector<AttributeDef>& attributes) {
  std::set<std::string> names;
  for (const auto& a : attributes) {
    if (a.name.empty()) throw ValidationError("attribute with empty name");
    if (!names.insert(a.name).second) {
      throw ValidationError("duplicate attribute " + a.name);
    }
    if (a.levels.empty()) {
      throw ValidationError("attribute " + a.name + " has no levels");
    }
    std::set<std::string> labels;
    for (const auto& l : a.levels) {
      if (!labels.insert(l).second) {
        throw ValidationError("attribute " + a.name + " repeats level '" + l +
                              "'");
      }
      if (l.find_first_of(",\n\r") != std::string::npos) {
        throw ValidationError("attribute " + a.name + " level '" + l +
                              "' contains a delimiter");
      }
    }
  }
}

}  // namespace

int AttributeDef::LevelIndex(std::string_view label) const {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == label) return static_cast<int>(i);
  }
  return -1;
}

AttributeDef MakeRangeAttribute(std::string name, int lo, int hi) {
  if (hi < lo) throw ValidationError("empty range for attribute " + name);
  AttributeDef def{std::move(name), {}, {}, {}};
  for (int v = lo; v <= hi; ++v) def.levels.push_back(std::to_string(v));
  return def;
}

bool CellCondition::Matches(std::span<const int> levels) const {
  for (const auto& c : clauses) {
    if (!c.allowed[levels[c.attribute]]) return false;
  }
  return true;
}

bool ExclusionRule::Excludes(std::span<const int> levels) const {
  if (!when.Matches(levels)) return false;
  return !require.has_value() || !require->Matches(levels);
}

CellCondition MakeCondition(const std::vector<AttributeDef>& attributes,
                            const LevelSpec& spec) {
  CellCondition cond;
  for (const auto& [name, labels] : spec) {
    const int a = FindAttribute(attributes, name);
    if (a < 0) throw ValidationError("rule names unknown attribute " + name);
    CellCondition::Clause clause{a, std::vector<bool>(attributes[a].size())};
    for (const auto& label : labels) {
      const int l = attributes[a].LevelIndex(label);
      if (l < 0) {
        throw ValidationError("rule names unknown level '" + label +
                              "' of attribute " + name);
      }
      clause.allowed[l] = true;
    }
    cond.clauses.push_back(std::move(clause));
  }
  return cond;
}

std::vector<ExclusionRule> MakeRangeRules(
    const std::vector<AttributeDef>& attributes, const std::string& attribute,
    const std::string& range_attribute,
    const std::vector<std::pair<std::string, std::pair<int, int>>>& ranges) {
  const int r = FindAttribute(attributes, range_attribute);
  if (r < 0) {
    throw ValidationError("range rule names unknown attribute " +
                          range_attribute);
  }
  std::vector<int> values;
  for (const auto& l : attributes[r].levels) {
    values.push_back(ParseIntLabel(l, range_attribute));
  }
  std::vector<ExclusionRule> rules;
  for (const auto& [level, bounds] : ranges) {
    ExclusionRule rule;
    rule.description = attribute + "=" + level + " requires " +
                       range_attribute + " in [" +
                       std::to_string(bounds.first) + "," +
                       std::to_string(bounds.second) + "]";
    rule.when = MakeCondition(attributes, {{attribute, {level}}});
    CellCondition::Clause clause{r, std::vector<bool>(values.size())};
    for (std::size_t i = 0; i < values.size(); ++i) {
      clause.allowed[i] = values[i] >= bounds.first && values[i] <= bounds.second;
    }
    rule.require = CellCondition{{std::move(clause)}};
    rules.push_back(std::move(rule));
  }
  return rules;
}

std::vector<bool> BuildValidCells(const std::vector<AttributeDef>& attributes,
                                  const std::vector<ExclusionRule>& rules) {
  std::int64_t cells = 1;
  for (const auto& a : attributes) cells *= a.size();
  std::vector<bool> valid(cells, true);
  if (rules.empty()) return valid;
  std::vector<int> levels(attributes.size(), 0);
  std::int64_t cell = 0;
  do {
    for (const auto& rule : rules) {
      if (rule.Excludes(levels)) {
        valid[cell] = false;
        break;
      }
    }
    ++cell;
  } while (Advance(attributes, levels));
  return valid;
}

AttributeDef BuildCombinedAttribute(std::string name,
                                    std::vector<AttributeDef> components,
                                    const std::vector<ExclusionRule>& rules) {
  CheckAttributes(components);
  const std::vector<bool> valid = BuildValidCells(components, rules);
  AttributeDef def;
  def.name = std::move(name);
  std::vector<int> levels(components.size(), 0);
  std::int64_t cell = 0;
  do {
    if (valid[cell]) {
      std::string label;
      for (std::size_t a = 0; a < components.size(); ++a) {
        if (a) label += '/';
        label += components[a].levels[levels[a]];
      }
      def.levels.push_back(std::move(label));
      def.component_levels.push_back(levels);
    }
    ++cell;
  } while (Advance(components, levels));
  def.components = std::move(components);
  if (def.levels.empty()) {
    throw ValidationError("combined attribute " + def.name +
                          " has no valid level");
  }
  return def;
}

Schema::Schema(std::vector<AttributeDef> attributes,
               std::vector<ExclusionRule> rules)
    : attributes_(std::move(attributes)), rules_(std::move(rules)) {
  if (attributes_.empty()) throw ValidationError("schema has no attributes");
  CheckAttributes(attributes_);
  strides_.assign(attributes_.size(), 1);
  for (int a = attribute_count() - 1; a >= 0; --a) {
    strides_[a] = cell_count_;
    if (cell_count_ > std::numeric_limits<std::int64_t>::max() /
                          attributes_[a].size()) {
      throw ValidationError("schema cross product is too large");
    }
    cell_count_ *= attributes_[a].size();
  }
  for (const auto& rule : rules_) {
    for (const auto& c : rule.when.clauses) {
      if (c.attribute >= attribute_count()) {
        throw ValidationError("rule refers to a missing attribute");
      }
    }
  }
  valid_ = BuildValidCells(attributes_, rules_);
  for (bool v : valid_) valid_count_ += v;
}

int Schema::AttributeIndex(std::string_view name) const {
  return FindAttribute(attributes_, name);
}

std::int64_t Schema::CellIndex(std::span<const int> levels) const {
  std::int64_t cell = 0;
  for (int a = 0; a < attribute_count(); ++a) cell += levels[a] * strides_[a];
  return cell;
}

void Schema::CellLevels(std::int64_t cell, std::span<int> levels) const {
  for (int a = 0; a < attribute_count(); ++a) levels[a] = LevelOf(cell, a);
}

std::vector<std::string> Schema::CellLabels(std::int64_t cell) const {
  std::vector<std::string> labels;
  for (int a = 0; a < attribute_count(); ++a) {
    labels.push_back(attributes_[a].levels[LevelOf(cell, a)]);
  }
  return labels;
}

bool Schema::SameShape(const Schema& other) const {
  if (this == &other) return true;
  if (attribute_count() != other.attribute_count()) return false;
  for (int a = 0; a < attribute_count(); ++a) {
    if (attributes_[a].name != other.attributes_[a].name ||
        attributes_[a].levels != other.attributes_[a].levels) {
      return false;
    }
  }
  return valid_ == other.valid_;
}

}  // namespace topdown
