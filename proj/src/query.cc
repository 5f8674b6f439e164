#include "topdown/query.h"

#include <set>

#include "topdown/errors.h"

namespace topdown {

AttributeGrouping AttributeGrouping::Identity(const AttributeDef& attribute) {
  AttributeGrouping g;
  for (int l = 0; l < attribute.size(); ++l) {
    g.group_of_level.push_back(l);
    g.group_labels.push_back(attribute.levels[l]);
  }
  return g;
}

AttributeGrouping AttributeGrouping::Total(const AttributeDef& attribute) {
  return AttributeGrouping{std::vector<int>(attribute.size(), 0), {"*"}};
}

QueryGroup::QueryGroup(std::string id, std::shared_ptr<const Schema> schema,
                       std::vector<AttributeGrouping> groupings)
    : id_(std::move(id)),
      schema_(std::move(schema)),
      groupings_(std::move(groupings)) {
  if (id_.empty()) throw ValidationError("query with empty id");
  if (static_cast<int>(groupings_.size()) != schema_->attribute_count()) {
    throw ValidationError("query " + id_ +
                          ": grouping count does not match the schema");
  }
  out_strides_.assign(groupings_.size(), 1);
  for (int a = schema_->attribute_count() - 1; a >= 0; --a) {
    const auto& g = groupings_[a];
    const auto& attr = schema_->attribute(a);
    if (static_cast<int>(g.group_of_level.size()) != attr.size()) {
      throw ValidationError("query " + id_ + ": grouping of " + attr.name +
                            " does not cover its levels");
    }
    if (g.group_count() == 0) {
      throw ValidationError("query " + id_ + ": empty grouping of " +
                            attr.name);
    }
    std::vector<bool> used(g.group_count(), false);
    for (int l = 0; l < attr.size(); ++l) {
      const int grp = g.group_of_level[l];
      if (grp < 0 || grp >= g.group_count()) {
        throw ValidationError("query " + id_ + ": level " + attr.levels[l] +
                              " of " + attr.name + " maps to no group");
      }
      used[grp] = true;
      if (grp != l) identity_ = false;
    }
    for (int grp = 0; grp < g.group_count(); ++grp) {
      if (!used[grp]) {
        throw ValidationError("query " + id_ + ": group " +
                              g.group_labels[grp] + " of " + attr.name +
                              " is empty");
      }
    }
    if (g.group_count() != attr.size()) identity_ = false;
    out_strides_[a] = output_cells_;
    output_cells_ *= g.group_count();
  }
}

QueryGroup QueryGroup::Identity(std::string id,
                                std::shared_ptr<const Schema> schema) {
  std::vector<AttributeGrouping> g;
  for (const auto& a : schema->attributes()) {
    g.push_back(AttributeGrouping::Identity(a));
  }
  return QueryGroup(std::move(id), std::move(schema), std::move(g));
}

QueryGroup QueryGroup::Total(std::string id,
                             std::shared_ptr<const Schema> schema) {
  std::vector<AttributeGrouping> g;
  for (const auto& a : schema->attributes()) {
    g.push_back(AttributeGrouping::Total(a));
  }
  return QueryGroup(std::move(id), std::move(schema), std::move(g));
}

QueryGroup QueryGroup::Marginal(std::string id,
                                std::shared_ptr<const Schema> schema,
                                const std::vector<std::string>& keep) {
  std::set<std::string> kept(keep.begin(), keep.end());
  std::vector<AttributeGrouping> g;
  for (const auto& a : schema->attributes()) {
    g.push_back(kept.erase(a.name) ? AttributeGrouping::Identity(a)
                                   : AttributeGrouping::Total(a));
  }
  if (!kept.empty()) {
    throw ValidationError("query " + id + " keeps unknown attribute " +
                          *kept.begin());
  }
  return QueryGroup(std::move(id), std::move(schema), std::move(g));
}

std::int64_t QueryGroup::OutputCell(std::int64_t cell) const {
  std::int64_t row = 0;
  for (int a = 0; a < schema_->attribute_count(); ++a) {
    row += groupings_[a].group_of_level[schema_->LevelOf(cell, a)] *
           out_strides_[a];
  }
  return row;
}

std::string QueryGroup::OutputLabel(std::int64_t row) const {
  std::string label;
  for (int a = 0; a < schema_->attribute_count(); ++a) {
    const auto& g = groupings_[a];
    if (g.group_count() == 1) continue;
    const int grp = static_cast<int>((row / out_strides_[a]) % g.group_count());
    if (!label.empty()) label += " x ";
    label += g.group_labels[grp];
  }
  return label.empty() ? "total" : label;
}

std::vector<std::int64_t> QueryMatrix::Apply(
    std::span<const std::int64_t> x) const {
  std::vector<std::int64_t> y(rows, 0);
  for (std::int64_t c = 0; c < cols; ++c) y[row_of_col[c]] += x[c];
  return y;
}

std::vector<double> QueryMatrix::Apply(std::span<const double> x) const {
  std::vector<double> y(rows, 0.0);
  for (std::int64_t c = 0; c < cols; ++c) y[row_of_col[c]] += x[c];
  return y;
}

std::vector<std::vector<int>> QueryMatrix::Dense() const {
  std::vector<std::vector<int>> m(rows, std::vector<int>(cols, 0));
  for (std::int64_t c = 0; c < cols; ++c) m[row_of_col[c]][c] = 1;
  return m;
}

QueryMatrix MaterializeQueryMatrix(const QueryGroup& query,
                                   const Schema& schema) {
  if (!query.schema().SameShape(schema)) {
    throw ValidationError("query " + query.id() +
                          " belongs to a different schema");
  }
  QueryMatrix m;
  m.rows = query.output_cells();
  m.cols = schema.cell_count();
  m.row_of_col.resize(m.cols);
  // Odometer walk: each attribute contributes its group offset.
  const int n = schema.attribute_count();
  std::vector<int> levels(n, 0);
  std::vector<std::int64_t> out_stride(n, 1);
  for (int a = n - 2; a >= 0; --a) {
    out_stride[a] = out_stride[a + 1] * query.grouping(a + 1).group_count();
  }
  auto row_of = [&]() {
    std::int64_t r = 0;
    for (int a = 0; a < n; ++a) {
      r += query.grouping(a).group_of_level[levels[a]] * out_stride[a];
    }
    return r;
  };
  for (std::int64_t c = 0; c < m.cols; ++c) {
    m.row_of_col[c] = row_of();
    for (int a = n - 1; a >= 0; --a) {
      if (++levels[a] < schema.attribute(a).size()) break;
      levels[a] = 0;
    }
  }
  return m;
}

std::vector<std::int64_t> EvaluateQuery(const QueryGroup& query,
                                        const Histogram& histogram) {
  if (!query.schema().SameShape(histogram.schema())) {
    throw ValidationError("query " + query.id() +
                          " evaluated on a histogram of another schema");
  }
  std::vector<std::int64_t> out(query.output_cells(), 0);
  const auto& counts = histogram.counts();
  for (std::int64_t c = 0; c < static_cast<std::int64_t>(counts.size()); ++c) {
    if (counts[c] != 0) out[query.OutputCell(c)] += counts[c];
  }
  return out;
}

}  // namespace topdown
