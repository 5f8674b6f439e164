#ifndef TOPDOWN_SCHEMA_H_
#define TOPDOWN_SCHEMA_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace topdown {

// One categorical attribute. A combined attribute (HHTYPE-style) additionally
// carries its component attributes and, per level, the component level
// indices that the level stands for.
struct AttributeDef {
  std::string name;
  std::vector<std::string> levels;
  std::vector<AttributeDef> components;
  std::vector<std::vector<int>> component_levels;

  int size() const { return static_cast<int>(levels.size()); }
  // Index of `label`, or -1.
  int LevelIndex(std::string_view label) const;
  bool is_combined() const { return !components.empty(); }
};

// Labels "lo".."hi" for integer-valued attributes such as AGE.
AttributeDef MakeRangeAttribute(std::string name, int lo, int hi);

// Conjunction of per-attribute level sets; an empty condition matches all.
struct CellCondition {
  struct Clause {
    int attribute = 0;
    std::vector<bool> allowed;
  };
  std::vector<Clause> clauses;

  bool Matches(std::span<const int> levels) const;
};

// Excludes every cell matching `when` unless it also matches `require`.
// Without `require` the rule excludes all matching cells.
struct ExclusionRule {
  std::string description;
  CellCondition when;
  std::optional<CellCondition> require;

  bool Excludes(std::span<const int> levels) const;
};

using LevelSpec = std::vector<std::pair<std::string, std::vector<std::string>>>;

// Builds a condition from attribute names and level labels; throws
// ValidationError naming any unknown attribute or label.
CellCondition MakeCondition(const std::vector<AttributeDef>& attributes,
                            const LevelSpec& spec);

// "`attribute` level L requires `range_attribute` within [lo, hi]" for every
// (L, lo, hi) entry. The range attribute must have integer labels.
std::vector<ExclusionRule> MakeRangeRules(
    const std::vector<AttributeDef>& attributes, const std::string& attribute,
    const std::string& range_attribute,
    const std::vector<std::pair<std::string, std::pair<int, int>>>& ranges);

// Cross product minus the cells excluded by any rule, as a membership mask in
// lexicographic cell order.
std::vector<bool> BuildValidCells(const std::vector<AttributeDef>& attributes,
                                  const std::vector<ExclusionRule>& rules);

// Combined attribute whose levels are the valid component tuples, labelled by
// joining component labels with '/'.
AttributeDef BuildCombinedAttribute(std::string name,
                                    std::vector<AttributeDef> components,
                                    const std::vector<ExclusionRule>& rules);

class Schema {
 public:
  explicit Schema(std::vector<AttributeDef> attributes,
                  std::vector<ExclusionRule> rules = {});

  const std::vector<AttributeDef>& attributes() const { return attributes_; }
  const AttributeDef& attribute(int i) const { return attributes_[i]; }
  int attribute_count() const { return static_cast<int>(attributes_.size()); }
  // Index of the named attribute, or -1.
  int AttributeIndex(std::string_view name) const;

  std::int64_t cell_count() const { return cell_count_; }
  std::int64_t stride(int attribute) const { return strides_[attribute]; }

  std::int64_t CellIndex(std::span<const int> levels) const;
  void CellLevels(std::int64_t cell, std::span<int> levels) const;
  int LevelOf(std::int64_t cell, int attribute) const {
    return static_cast<int>((cell / strides_[attribute]) %
                            attributes_[attribute].size());
  }
  // Level labels of a cell in attribute order.
  std::vector<std::string> CellLabels(std::int64_t cell) const;

  bool IsValid(std::int64_t cell) const { return valid_[cell]; }
  const std::vector<bool>& valid_cells() const { return valid_; }
  std::int64_t valid_count() const { return valid_count_; }
  const std::vector<ExclusionRule>& rules() const { return rules_; }

  bool SameShape(const Schema& other) const;

 private:
  std::vector<AttributeDef> attributes_;
  std::vector<ExclusionRule> rules_;
  std::vector<std::int64_t> strides_;
  std::int64_t cell_count_ = 1;
  std::vector<bool> valid_;
  std::int64_t valid_count_ = 0;
};

}  // namespace topdown

#endif  // TOPDOWN_SCHEMA_H_
