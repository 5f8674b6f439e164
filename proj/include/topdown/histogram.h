#ifndef TOPDOWN_HISTOGRAM_H_
#define TOPDOWN_HISTOGRAM_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "topdown/schema.h"

namespace topdown {

struct MicrodataRecord {
  std::string geocode;
  std::vector<std::string> values;  // one label per schema attribute

  bool operator==(const MicrodataRecord&) const = default;
};

// Dense integer cell counts for one geographic unit.
class Histogram {
 public:
  explicit Histogram(std::shared_ptr<const Schema> schema);
  Histogram(std::shared_ptr<const Schema> schema,
            std::vector<std::int64_t> counts);

  const Schema& schema() const { return *schema_; }
  const std::shared_ptr<const Schema>& schema_ptr() const { return schema_; }
  const std::vector<std::int64_t>& counts() const { return counts_; }
  std::vector<std::int64_t>& mutable_counts() { return counts_; }
  std::int64_t operator[](std::int64_t cell) const { return counts_[cell]; }
  std::int64_t Total() const;

  bool operator==(const Histogram& other) const {
    return counts_ == other.counts_ && schema_->SameShape(*other.schema_);
  }

 private:
  std::shared_ptr<const Schema> schema_;
  std::vector<std::int64_t> counts_;
};

enum class GeocodeFilter { kFilter, kAssumeFiltered };

// Tabulates records into lexicographic cell counts. With kFilter only records
// whose geocode equals `geocode` are counted.
Histogram MicrodataToHistogram(std::span<const MicrodataRecord> records,
                               std::shared_ptr<const Schema> schema,
                               std::string_view geocode,
                               GeocodeFilter filter = GeocodeFilter::kFilter);

// Level indices of a record, validated against the schema. `record_index`
// only feeds error messages.
std::int64_t RecordCell(const Schema& schema, const MicrodataRecord& record,
                        std::size_t record_index);

// One record per unit of count, in ascending cell order.
std::vector<MicrodataRecord> HistogramToMicrodata(const Histogram& histogram,
                                                  std::string_view geocode);

// Same, from a raw count vector; rejects negative counts.
std::vector<MicrodataRecord> CountsToMicrodata(
    const Schema& schema, std::span<const std::int64_t> counts,
    std::string_view geocode);

}  // namespace topdown

#endif  // TOPDOWN_HISTOGRAM_H_
