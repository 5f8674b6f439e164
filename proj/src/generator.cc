#include "topdown/generator.h"

#include <cmath>
#include <sstream>

#include "topdown/csv.h"
#include "topdown/errors.h"
#include "topdown/random.h"

namespace topdown {

namespace {

std::string Padded(int index, int digits) {
  std::string s = std::to_string(index);
  return std::string(digits - std::min<int>(digits, s.size()), '0') + s;
}

// Uniform valid record with the given RELGQ level, by rejection.
std::vector<std::string> SampleRecord(const Schema& schema, int relgq,
                                      int relgq_level, KeyedRng& rng) {
  std::vector<int> levels(schema.attribute_count());
  for (int attempt = 0; attempt < 100000; ++attempt) {
    for (int a = 0; a < schema.attribute_count(); ++a) {
      levels[a] = a == relgq ? relgq_level
                             : static_cast<int>(rng.UniformBelow(
                                   schema.attribute(a).size()));
    }
    const std::int64_t cell = schema.CellIndex(levels);
    if (schema.IsValid(cell)) return schema.CellLabels(cell);
  }
  throw ValidationError("no valid record with " +
                        schema.attribute(relgq).name + " = " +
                        schema.attribute(relgq).levels[relgq_level]);
}

}  // namespace

ToyUniverse GenerateToyUniverse(const RunConfig& config, std::uint64_t seed) {
  if (!config.generator) throw ValidationError("config has no generator section");
  if (config.dual()) {
    throw ValidationError("the generator does not support dual histograms");
  }
  const GeneratorConfig& gen = *config.generator;
  const Schema& schema = *config.schema;
  const int relgq = schema.AttributeIndex(config.gq_repair.relgq_attribute);
  const AttributeDef& rel = schema.attribute(relgq);

  ToyUniverse out;
  std::vector<std::string> frontier = {
      Padded(1, config.prefix_lengths[0])};
  for (std::size_t l = 0; l < gen.fanout.size(); ++l) {
    const int digits = config.prefix_lengths[l + 1] - config.prefix_lengths[l];
    std::vector<std::string> next;
    for (const auto& g : frontier) {
      for (int c = 1; c <= gen.fanout[l]; ++c) next.push_back(g + Padded(c, digits));
    }
    frontier = std::move(next);
  }
  out.block_geocodes = frontier;

  KeyedRng sizes = KeyedRng::ForPath(seed, "generate", "sizes");
  std::vector<double> weight(frontier.size());
  double total_weight = 0;
  for (auto& w : weight) {
    w = 0.5 + sizes.UniformDouble();
    total_weight += w;
  }

  std::vector<std::pair<std::string, int>> gq_levels;  // label, code
  for (const auto& [label, code] : config.gq_repair.gq_codes) {
    gq_levels.emplace_back(label, code);
  }
  const int householder = rel.LevelIndex(gen.householder_level);
  std::vector<int> members;
  for (const auto& m : gen.member_levels) members.push_back(rel.LevelIndex(m));

  for (std::size_t b = 0; b < frontier.size(); ++b) {
    const std::string& block = frontier[b];
    KeyedRng rng = KeyedRng::ForPath(seed, "generate", block);
    auto emit = [&](int level) {
      out.records.push_back(
          {block, SampleRecord(schema, relgq, level, rng)});
    };
    const std::int64_t target = std::max<std::int64_t>(
        1, std::llround(gen.records * weight[b] / total_weight));
    std::int64_t placed = 0;
    if (!gq_levels.empty() && rng.UniformDouble() < gen.gq_block_share) {
      const auto& [label, code] = gq_levels[rng.UniformBelow(gq_levels.size())];
      const auto residents =
          static_cast<std::int64_t>(1 + rng.UniformBelow(gen.max_gq_residents));
      out.facilities[block][code] = 1;
      for (std::int64_t r = 0; r < residents; ++r) emit(rel.LevelIndex(label));
      placed += residents;
    }
    while (placed < target) {
      const int size = 1 + static_cast<int>(rng.UniformBelow(gen.max_household_size));
      emit(householder);
      for (int m = 1; m < size && !members.empty(); ++m) {
        emit(members[rng.UniformBelow(members.size())]);
      }
      placed += members.empty() ? 1 : size;
    }
  }
  return out;
}

std::string SerializeMicrodata(const Schema& schema,
                               const std::vector<MicrodataRecord>& records) {
  std::vector<std::string> header = {"GEOCODE"};
  for (const auto& a : schema.attributes()) header.push_back(a.name);
  std::string out = JoinCsv(header) + "\n";
  for (const auto& r : records) {
    std::vector<std::string> row = {r.geocode};
    row.insert(row.end(), r.values.begin(), r.values.end());
    out += JoinCsv(row) + "\n";
  }
  return out;
}

std::vector<MicrodataRecord> ParseMicrodata(const std::string& text,
                                            const Schema& schema,
                                            const std::string& source) {
  const CsvTable table = ParseCsv(text, source);
  if (table.header.empty() || table.header[0] != "GEOCODE") {
    throw DataError(source + ": first column must be GEOCODE");
  }
  // Column of each schema attribute.
  std::vector<int> column(schema.attribute_count(), -1);
  for (std::size_t c = 1; c < table.header.size(); ++c) {
    const int a = schema.AttributeIndex(table.header[c]);
    if (a < 0) {
      throw DataError(source + ": unknown column '" + table.header[c] + "'");
    }
    column[a] = static_cast<int>(c);
  }
  for (int a = 0; a < schema.attribute_count(); ++a) {
    if (column[a] < 0) {
      throw DataError(source + ": missing column '" +
                      schema.attribute(a).name + "'");
    }
  }
  std::vector<MicrodataRecord> records;
  records.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    MicrodataRecord r{row[0], {}};
    for (int a = 0; a < schema.attribute_count(); ++a) {
      r.values.push_back(row[column[a]]);
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::string SerializeFacilities(const FacilityCounts& facilities) {
  std::ostringstream out;
  out << "geocode,gq_type,facilities\n";
  for (const auto& [g, codes] : facilities) {
    for (const auto& [code, n] : codes) out << g << ',' << code << ',' << n << '\n';
  }
  return out.str();
}

FacilityCounts ParseFacilities(const std::string& text,
                               const std::string& source) {
  const CsvTable table = ParseCsv(text, source);
  if (table.header !=
      std::vector<std::string>{"geocode", "gq_type", "facilities"}) {
    throw DataError(source + ": expected header geocode,gq_type,facilities");
  }
  FacilityCounts out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string at = source + ":" + std::to_string(table.line_numbers[i]);
    const auto code = ParseInt64(row[1], at);
    const auto n = ParseInt64(row[2], at);
    if (n < 0) throw DataError(at + ": negative facility count");
    if (!out[row[0]].emplace(static_cast<int>(code), n).second) {
      throw DataError(at + ": duplicate row");
    }
  }
  return out;
}

}  // namespace topdown
