#ifndef TOPDOWN_UNIVERSE_H_
#define TOPDOWN_UNIVERSE_H_

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "topdown/query.h"
#include "topdown/schema.h"

namespace topdown {

// The per-unit data vector of a run: one histogram, or two side by side in
// dual-histogram mode (persons/households first, housing units second).
// Cells are addressed by a flat index over the concatenation.
struct HistogramComponent {
  std::string name;
  std::shared_ptr<const Schema> schema;
  std::int64_t offset = 0;
};

class Universe {
 public:
  Universe() = default;
  static Universe Single(std::shared_ptr<const Schema> schema,
                         std::string name = "main");

  void AddComponent(std::string name, std::shared_ptr<const Schema> schema);

  const std::vector<HistogramComponent>& components() const {
    return components_;
  }
  const HistogramComponent& component(int i) const { return components_[i]; }
  int component_count() const { return static_cast<int>(components_.size()); }
  int ComponentIndex(std::string_view name) const;
  int ComponentOf(std::int64_t flat_cell) const;

  std::int64_t cell_count() const { return cell_count_; }
  bool IsFixedZero(std::int64_t flat_cell) const {
    return fixed_zero_[flat_cell];
  }
  const std::vector<bool>& fixed_zero() const { return fixed_zero_; }

 private:
  std::vector<HistogramComponent> components_;
  std::int64_t cell_count_ = 0;
  std::vector<bool> fixed_zero_;
};

// A query group over one component, materialized against flat cells.
struct FlatQuery {
  QueryGroup group;
  int component = 0;
  std::int64_t offset = 0;
  QueryMatrix matrix;

  const std::string& id() const { return group.id(); }
  std::int64_t rows() const { return matrix.rows; }
  std::vector<std::int64_t> Evaluate(std::span<const std::int64_t> flat) const;
  std::vector<double> Evaluate(std::span<const double> flat) const;
};

FlatQuery MakeFlatQuery(const Universe& universe, int component,
                        QueryGroup group);

// Materialized queries of a run, addressable by id.
class QueryCatalog {
 public:
  void Add(FlatQuery query);
  bool Contains(const std::string& id) const { return index_.count(id) != 0; }
  const FlatQuery& at(const std::string& id) const;
  const std::vector<FlatQuery>& queries() const { return queries_; }

 private:
  std::vector<FlatQuery> queries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace topdown

#endif  // TOPDOWN_UNIVERSE_H_
