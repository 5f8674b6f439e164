#include "topdown/histogram.h"

#include <numeric>

#include "topdown/errors.h"

namespace topdown {

Histogram::Histogram(std::shared_ptr<const Schema> schema)
    : schema_(std::move(schema)), counts_(schema_->cell_count(), 0) {}

Histogram::Histogram(std::shared_ptr<const Schema> schema,
                     std::vector<std::int64_t> counts)
    : schema_(std::move(schema)), counts_(std::move(counts)) {
  if (static_cast<std::int64_t>(counts_.size()) != schema_->cell_count()) {
    throw DataError("histogram length " + std::to_string(counts_.size()) +
                    " does not match schema cell count " +
                    std::to_string(schema_->cell_count()));
  }
}

std::int64_t Histogram::Total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

std::int64_t RecordCell(const Schema& schema, const MicrodataRecord& record,
                        std::size_t record_index) {
  if (static_cast<int>(record.values.size()) != schema.attribute_count()) {
    throw DataError("record " + std::to_string(record_index) + " has " +
                    std::to_string(record.values.size()) +
                    " values, schema has " +
                    std::to_string(schema.attribute_count()) + " attributes");
  }
  std::int64_t cell = 0;
  for (int a = 0; a < schema.attribute_count(); ++a) {
    const int level = schema.attribute(a).LevelIndex(record.values[a]);
    if (level < 0) {
      throw DataError("record " + std::to_string(record_index) +
                      ": unknown level '" + record.values[a] +
                      "' for attribute " + schema.attribute(a).name);
    }
    cell += level * schema.stride(a);
  }
  if (!schema.IsValid(cell)) {
    throw DataError("record " + std::to_string(record_index) +
                    " falls in an excluded cell");
  }
  return cell;
}

Histogram MicrodataToHistogram(std::span<const MicrodataRecord> records,
                               std::shared_ptr<const Schema> schema,
                               std::string_view geocode, GeocodeFilter filter) {
  Histogram h(std::move(schema));
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (filter == GeocodeFilter::kFilter && records[i].geocode != geocode) {
      continue;
    }
    ++h.mutable_counts()[RecordCell(h.schema(), records[i], i)];
  }
  return h;
}

std::vector<MicrodataRecord> CountsToMicrodata(
    const Schema& schema, std::span<const std::int64_t> counts,
    std::string_view geocode) {
  if (static_cast<std::int64_t>(counts.size()) != schema.cell_count()) {
    throw DataError("count vector does not match the schema");
  }
  std::vector<MicrodataRecord> out;
  for (std::int64_t cell = 0; cell < schema.cell_count(); ++cell) {
    if (counts[cell] < 0) {
      throw DataError("negative count at cell " + std::to_string(cell));
    }
    if (counts[cell] == 0) continue;
    MicrodataRecord r{std::string(geocode), schema.CellLabels(cell)};
    for (std::int64_t k = 0; k < counts[cell]; ++k) out.push_back(r);
  }
  return out;
}

std::vector<MicrodataRecord> HistogramToMicrodata(const Histogram& histogram,
                                                  std::string_view geocode) {
  return CountsToMicrodata(histogram.schema(), histogram.counts(), geocode);
}

}  // namespace topdown
