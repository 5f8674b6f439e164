#include "topdown/universe.h"

#include "topdown/errors.h"

namespace topdown {

Universe Universe::Single(std::shared_ptr<const Schema> schema,
                          std::string name) {
  Universe u;
  u.AddComponent(std::move(name), std::move(schema));
  return u;
}

void Universe::AddComponent(std::string name,
                            std::shared_ptr<const Schema> schema) {
  if (ComponentIndex(name) >= 0) {
    throw ValidationError("duplicate histogram component " + name);
  }
  components_.push_back({std::move(name), schema, cell_count_});
  cell_count_ += schema->cell_count();
  for (bool v : schema->valid_cells()) fixed_zero_.push_back(!v);
}

int Universe::ComponentIndex(std::string_view name) const {
  for (int i = 0; i < component_count(); ++i) {
    if (components_[i].name == name) return i;
  }
  return -1;
}

int Universe::ComponentOf(std::int64_t flat_cell) const {
  for (int i = component_count() - 1; i >= 0; --i) {
    if (flat_cell >= components_[i].offset) return i;
  }
  return 0;
}

std::vector<std::int64_t> FlatQuery::Evaluate(
    std::span<const std::int64_t> flat) const {
  return matrix.Apply(flat.subspan(offset, matrix.cols));
}

std::vector<double> FlatQuery::Evaluate(std::span<const double> flat) const {
  return matrix.Apply(flat.subspan(offset, matrix.cols));
}

FlatQuery MakeFlatQuery(const Universe& universe, int component,
                        QueryGroup group) {
  if (component < 0 || component >= universe.component_count()) {
    throw ValidationError("query " + group.id() +
                          " refers to a missing histogram component");
  }
  const auto& comp = universe.component(component);
  QueryMatrix m = MaterializeQueryMatrix(group, *comp.schema);
  return FlatQuery{std::move(group), component, comp.offset, std::move(m)};
}

void QueryCatalog::Add(FlatQuery query) {
  const std::string id = query.id();
  if (!index_.emplace(id, queries_.size()).second) {
    throw ValidationError("duplicate query id " + id);
  }
  queries_.push_back(std::move(query));
}

const FlatQuery& QueryCatalog::at(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ValidationError("unknown query id " + id);
  return queries_[it->second];
}

}  // namespace topdown
