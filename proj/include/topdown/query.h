#ifndef TOPDOWN_QUERY_H_
#define TOPDOWN_QUERY_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "topdown/histogram.h"
#include "topdown/schema.h"

namespace topdown {

// Partition of one attribute's levels into output groups.
struct AttributeGrouping {
  std::vector<int> group_of_level;
  std::vector<std::string> group_labels;

  int group_count() const { return static_cast<int>(group_labels.size()); }

  static AttributeGrouping Identity(const AttributeDef& attribute);
  static AttributeGrouping Total(const AttributeDef& attribute);
};

// A marginal query: per-attribute level groupings whose Kronecker product is
// the query matrix.
class QueryGroup {
 public:
  QueryGroup(std::string id, std::shared_ptr<const Schema> schema,
             std::vector<AttributeGrouping> groupings);

  static QueryGroup Identity(std::string id,
                             std::shared_ptr<const Schema> schema);
  static QueryGroup Total(std::string id, std::shared_ptr<const Schema> schema);
  // Keeps the named attributes at full detail and marginalizes the others.
  static QueryGroup Marginal(std::string id,
                             std::shared_ptr<const Schema> schema,
                             const std::vector<std::string>& keep);

  const std::string& id() const { return id_; }
  const Schema& schema() const { return *schema_; }
  const std::shared_ptr<const Schema>& schema_ptr() const { return schema_; }
  const AttributeGrouping& grouping(int attribute) const {
    return groupings_[attribute];
  }
  std::int64_t output_cells() const { return output_cells_; }
  bool is_identity() const { return identity_; }

  std::int64_t OutputCell(std::int64_t cell) const;
  // Group labels of an output cell joined by " x " (or "total").
  std::string OutputLabel(std::int64_t row) const;

 private:
  std::string id_;
  std::shared_ptr<const Schema> schema_;
  std::vector<AttributeGrouping> groupings_;
  std::vector<std::int64_t> out_strides_;
  std::int64_t output_cells_ = 1;
  bool identity_ = true;
};

// Sparse 0/1 map with exactly one nonzero per column: column c has its 1 in
// row row_of_col[c].
struct QueryMatrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<std::int64_t> row_of_col;

  std::vector<std::int64_t> Apply(std::span<const std::int64_t> x) const;
  std::vector<double> Apply(std::span<const double> x) const;
  std::vector<std::vector<int>> Dense() const;
};

QueryMatrix MaterializeQueryMatrix(const QueryGroup& query,
                                   const Schema& schema);

std::vector<std::int64_t> EvaluateQuery(const QueryGroup& query,
                                        const Histogram& histogram);

}  // namespace topdown

#endif  // TOPDOWN_QUERY_H_
