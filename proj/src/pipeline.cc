#include "topdown/pipeline.h"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "topdown/csv.h"
#include "topdown/generator.h"
#include "topdown/gq_repair.h"
#include "topdown/histogram.h"
#include "topdown/measurement.h"
#include "topdown/metrics.h"
#include "topdown/strategy.h"
#include "topdown/topdown.h"

namespace topdown {

namespace {

using Json = nlohmann::ordered_json;

std::vector<std::int64_t> Slice(const std::vector<std::int64_t>& flat,
                                const HistogramComponent& component) {
  return {flat.begin() + component.offset,
          flat.begin() + component.offset + component.schema->cell_count()};
}

std::string SerializeMdf(const Spine& spine, const CountMap& units,
                         const HistogramComponent& component) {
  std::vector<MicrodataRecord> records;
  for (const auto& block : spine.Blocks()) {
    auto part = CountsToMicrodata(*component.schema,
                                  Slice(units.at(block), component), block);
    records.insert(records.end(), std::make_move_iterator(part.begin()),
                   std::make_move_iterator(part.end()));
  }
  return SerializeMicrodata(*component.schema, records);
}

// Reads per-block flat counts of one histogram component from microdata.
void AddMicrodata(const std::string& text, const std::string& source,
                  const HistogramComponent& component, std::int64_t cells,
                  CountMap* blocks) {
  const auto records = ParseMicrodata(text, *component.schema, source);
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::int64_t cell = 0;
    try {
      cell = RecordCell(*component.schema, records[i], i);
    } catch (const DataError& e) {
      throw DataError(source + ": " + e.what());
    }
    auto& v = (*blocks)[records[i].geocode];
    if (v.empty()) v.assign(cells, 0);
    ++v[component.offset + cell];
  }
}

}  // namespace

std::string RunManifest::ToJson() const {
  Json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["status"] = status;
  j["exit_code"] = exit_code;
  if (!failing_phase.empty()) j["failing_phase"] = failing_phase;
  if (!error.empty()) j["error"] = error;
  j["config_digest"] = config_digest;
  j["spine_digest"] = spine_digest;
  j["seed"] = seed;
  j["noiseless_debug"] = noiseless;
  Json phase_list = Json::array();
  for (const auto& p : phases) {
    phase_list.push_back({{"phase", p.phase}, {"wall_seconds", p.seconds}});
  }
  j["phases"] = phase_list;
  if (ledger) {
    Json entries = Json::array();
    for (const auto& e : ledger->ledger()) {
      entries.push_back({{"level", e.level},
                         {"query", e.query_id},
                         {"unit_class", e.unit_class},
                         {"rho", ToString(e.rho)}});
    }
    j["ledger"] = {{"entries", entries}, {"total_rho", total_rho}};
  }
  j["warnings"] = warnings;
  j["notes"] = notes;
  j["files_read"] = files_read;
  j["files_written"] = files_written;
  return j.dump(2) + "\n";
}

Pipeline::Pipeline(RunConfig config, PipelineOptions options)
    : config_(std::move(config)),
      options_(std::move(options)),
      seed_(options_.seed.value_or(config_.seed)),
      workers_(options_.workers.value_or(config_.workers)) {
  if (workers_ < 1) throw ValidationError("workers must be at least 1");
  manifest_.config_digest = config_.digest;
  manifest_.seed = seed_;
  manifest_.noiseless = options_.noiseless;
  manifest_.notes = config_.notes;
  std::error_code ec;
  std::filesystem::create_directories(options_.out_dir, ec);
  if (ec) {
    throw IoError("cannot create output directory '" + options_.out_dir +
                  "': " + ec.message());
  }
}

template <typename F>
void Pipeline::RunPhase(const std::string& name, F&& body) {
  current_phase_ = name;
  const auto start = std::chrono::steady_clock::now();
  body();
  const std::chrono::duration<double> elapsed =
      std::chrono::steady_clock::now() - start;
  manifest_.phases.push_back({name, elapsed.count()});
  current_phase_.clear();
}

std::string Pipeline::OutPath(const std::string& name) const {
  return (std::filesystem::path(options_.out_dir) / name).string();
}

std::string Pipeline::InputPath(const std::string& configured,
                                const std::string& default_name) const {
  return configured.empty() ? OutPath(default_name) : configured;
}

std::string Pipeline::Read(const std::string& path) {
  if (!FileExists(path)) throw IoError("missing input file: expected " + path);
  manifest_.files_read.push_back(path);
  return ReadFile(path);
}

void Pipeline::Write(const std::string& name, const std::string& contents) {
  const std::string path = OutPath(name);
  WriteFile(path, contents);
  manifest_.files_written.push_back(path);
}

const QueryCatalog& Pipeline::catalog() {
  if (!catalog_) catalog_ = BuildCatalog(config_);
  return *catalog_;
}

Spine Pipeline::LoadSpine() {
  Spine spine = Spine::Parse(Read(OutPath("spine.txt")));
  if (spine.levels() != config_.spine_levels) {
    throw DataError("spine.txt levels do not match the config");
  }
  manifest_.spine_digest = spine.Digest();
  return spine;
}

CountMap Pipeline::LoadCounts(const std::string& name, const Spine& spine) {
  const std::string path = OutPath(name);
  return ParseCounts(Read(path), spine, config_.universe.cell_count(), path);
}

std::string Pipeline::RunId() const {
  return Sha256Hex(config_.digest + ":" + std::to_string(seed_)).substr(0, 16);
}

void Pipeline::Generate() {
  RunPhase("generate", [&] {
    const ToyUniverse toy = GenerateToyUniverse(config_, seed_);
    Write("microdata.csv", SerializeMicrodata(*config_.schema, toy.records));
    Write("gq_facilities.csv", SerializeFacilities(toy.facilities));
    const auto& queries = config_.constraints.prior_release_queries;
    if (!queries.empty()) {
      CountMap blocks;
      const std::int64_t cells = config_.universe.cell_count();
      for (std::size_t i = 0; i < toy.records.size(); ++i) {
        auto& v = blocks[toy.records[i].geocode];
        if (v.empty()) v.assign(cells, 0);
        ++v[RecordCell(*config_.schema, toy.records[i], i)];
      }
      const Spine spine = BuildSpine(toy.block_geocodes, config_.prefix_lengths,
                                     config_.spine_levels);
      const CountMap units = AggregateUp(blocks, spine);
      Write("prior_release.csv",
            SerializePriorRelease(Tabulate(units, catalog(), queries)));
    }
    manifest_.notes.push_back(std::to_string(toy.records.size()) +
                              " records in " +
                              std::to_string(toy.block_geocodes.size()) +
                              " blocks");
  });
}

void Pipeline::Ingest() {
  RunPhase("ingest", [&] {
    const QueryCatalog& cat = catalog();
    const Universe& universe = config_.universe;
    CountMap blocks;
    const std::string micro = InputPath(config_.inputs.microdata, "microdata.csv");
    AddMicrodata(Read(micro), micro, universe.component(0),
                 universe.cell_count(), &blocks);
    if (config_.dual()) {
      const std::string path =
          InputPath(config_.inputs.units_microdata, "units_microdata.csv");
      AddMicrodata(Read(path), path, universe.component(1),
                   universe.cell_count(), &blocks);
    }
    std::vector<std::string> geocodes;
    for (const auto& [g, v] : blocks) geocodes.push_back(g);
    const Spine spine =
        BuildSpine(geocodes, config_.prefix_lengths, config_.spine_levels);
    manifest_.spine_digest = spine.Digest();
    const CountMap units = AggregateUp(blocks, spine);

    Tabulations prior;
    const auto& prior_queries = config_.constraints.prior_release_queries;
    if (!prior_queries.empty()) {
      const std::string path =
          InputPath(config_.inputs.prior_release, "prior_release.csv");
      prior = ParsePriorRelease(Read(path), path);
      ValidatePriorRelease(prior, spine, cat, prior_queries);
    }
    const UnitConstraintMap constraints = BuildUnitConstraints(
        spine, universe, cat, config_.constraints, units, prior);

    Write("spine.txt", spine.Serialize());
    Write("cef_units.csv", SerializeCounts(units));
    Write("unit_constraints.csv", SerializeUnitConstraints(constraints, spine));

    if (config_.gq_repair_enabled) {
      const std::string path =
          InputPath(config_.inputs.gq_facilities, "gq_facilities.csv");
      const FacilityCounts facilities = ParseFacilities(Read(path), path);
      std::vector<int> codes;
      for (const auto& [label, code] : config_.gq_repair.gq_codes) {
        codes.push_back(code);
      }
      std::sort(codes.begin(), codes.end());
      for (const auto& [g, by_code] : facilities) {
        if (!spine.Contains(g) || spine.unit(g).level != spine.block_level()) {
          throw DataError(path + ": '" + g + "' is not a block with records");
        }
        for (const auto& [code, n] : by_code) {
          if (!std::binary_search(codes.begin(), codes.end(), code)) {
            throw DataError(path + ": unknown GQ type " + std::to_string(code));
          }
        }
      }
      Write("gq_bounds.csv",
            SerializeGqBounds(BuildGqBounds(spine, facilities, codes)));
    }
  });
}

void Pipeline::Measure() {
  RunPhase("measure", [&] {
    const Spine spine = LoadSpine();
    const CountMap units = LoadCounts("cef_units.csv", spine);
    const StrategyTable adjusted =
        AdjustSingleChildAllocations(spine, config_.strategy);
    Accountant accountant;
    MeasureOptions options;
    options.seed = seed_;
    options.noiseless = options_.noiseless;
    options.workers = workers_;
    const Nmf nmf = RunMeasurementPhase(spine, units, adjusted, catalog(),
                                        options, RunId(), &accountant);
    Write("nmf.csv", SerializeNmf(nmf));
    Write("ledger.csv", accountant.ExportCsv());
    manifest_.total_rho = ToString(accountant.Total(&spine));
    manifest_.ledger = std::move(accountant);
    if (options_.noiseless) {
      manifest_.warnings.push_back(
          "noiseless debug run: measurements carry no noise and no privacy "
          "protection");
    }
    if (!adjusted.skipped().empty()) {
      manifest_.notes.push_back(
          std::to_string(adjusted.skipped().size()) +
          " single-child units pass their allocation to their child");
    }
  });
}

void Pipeline::Postprocess() {
  RunPhase("postprocess", [&] {
    const QueryCatalog& cat = catalog();
    const Spine spine = LoadSpine();
    const std::string nmf_path = OutPath("nmf.csv");
    const MeasurementIndex index =
        IndexMeasurements(ParseNmf(Read(nmf_path), nmf_path), cat);
    const std::string uc_path = OutPath("unit_constraints.csv");
    const UnitConstraintMap constraints =
        ParseUnitConstraints(Read(uc_path), uc_path);

    TopdownOptions options;
    options.plan = config_.pass_plan;
    options.workers = workers_;

    std::optional<GqRepairer> repairer;
    std::map<std::string, std::vector<GqBound>> bounds_of;
    std::vector<GqResidual> residuals;
    std::int64_t moves = 0;
    std::mutex mu;
    if (config_.gq_repair_enabled) {
      std::vector<QueryGroup> preserved;
      for (const auto& q : config_.constraints.prior_release_queries) {
        preserved.push_back(cat.at(q).group);
      }
      repairer.emplace(config_.schema, config_.gq_repair, std::move(preserved));
      const std::string path = OutPath("gq_bounds.csv");
      for (auto& b : ParseGqBounds(Read(path), path)) {
        bounds_of[b.geocode].push_back(std::move(b));
      }
      options.post_unit = [&](const std::string& g,
                              std::vector<std::int64_t>* counts) {
        const bool strict = config_.gq_repair.strict_levels.count(
                                spine.level_name(spine.unit(g).level)) != 0;
        KeyedRng rng = RepairRng(seed_, g);
        auto it = bounds_of.find(g);
        RepairOutcome outcome = repairer->RepairUnit(
            counts, it == bounds_of.end() ? std::vector<GqBound>{} : it->second,
            strict, rng, g);
        std::lock_guard<std::mutex> lock(mu);
        moves += outcome.moves;
        for (auto& r : outcome.residuals) residuals.push_back(std::move(r));
      };
    }

    TopdownResult result =
        RunTopdown(spine, config_.universe, cat, index, constraints, options);
    for (auto& w : result.warnings) manifest_.warnings.push_back(std::move(w));

    const ConstraintReport report =
        CheckConstraints(spine, config_.universe, result.units, constraints);
    Write("unit_histograms.csv", SerializeCounts(result.units));
    Write("mdf.csv",
          SerializeMdf(spine, result.units, config_.universe.component(0)));
    if (config_.dual()) {
      Write("mdf_units.csv",
            SerializeMdf(spine, result.units, config_.universe.component(1)));
    }
    Write("constraint_report.csv", report.text);
    if (report.failures > 0) {
      manifest_.warnings.push_back("constraint report lists " +
                                   std::to_string(report.failures) +
                                   " failing constraints");
    }
    if (repairer) {
      std::sort(residuals.begin(), residuals.end(),
                [](const GqResidual& a, const GqResidual& b) {
                  return std::tie(a.geocode, a.code) < std::tie(b.geocode, b.code);
                });
      Write("gq_residuals.csv", SerializeGqResiduals(residuals));
      manifest_.notes.push_back("GQ repair moved " + std::to_string(moves) +
                                " records");
      if (!residuals.empty()) {
        manifest_.warnings.push_back(
            std::to_string(residuals.size()) +
            " GQ bounds remain violated after repair (see gq_residuals.csv)");
      }
    }
  });
}

void Pipeline::Metrics() {
  RunPhase("metrics", [&] {
    if (config_.metrics.empty()) {
      throw ValidationError("config has no metrics requests");
    }
    const QueryCatalog& cat = catalog();
    const Spine spine = LoadSpine();
    const CountMap truth = LoadCounts("cef_units.csv", spine);
    const CountMap estimates = LoadCounts("unit_histograms.csv", spine);
    Accountant accountant = AccountantForTable(
        AdjustSingleChildAllocations(spine, config_.strategy), &spine);
    std::vector<NoisyMae> released;
    for (std::size_t i = 0; i < config_.metrics.size(); ++i) {
      KeyedRng rng = MetricRng(seed_, i);
      released.push_back(ReleaseNoisyMae(config_.metrics[i], estimates, truth,
                                         spine, cat, rng, &accountant));
    }
    Write("metrics.csv", SerializeMetrics(config_.metrics, released, cat));
    Write("ledger.csv", accountant.ExportCsv());
    const Rho release = accountant.ReleaseTotal();
    manifest_.notes.push_back("metric releases spend rho = " + ToString(release));
    if (config_.metric_budget_cap && release > *config_.metric_budget_cap) {
      manifest_.warnings.push_back(
          "metric releases spend rho = " + ToString(release) +
          ", above the configured cap " + ToString(*config_.metric_budget_cap));
    }
    manifest_.total_rho = ToString(accountant.Total(&spine));
    manifest_.ledger = std::move(accountant);
  });
}

void Pipeline::Ci() {
  RunPhase("ci", [&] {
    if (config_.ci_targets.empty()) {
      throw ValidationError("config has no ci targets");
    }
    const QueryCatalog& cat = catalog();
    const Spine spine = LoadSpine();
    const std::string path = OutPath("nmf.csv");
    const MeasurementIndex index = IndexMeasurements(ParseNmf(Read(path), path), cat);
    std::vector<ConfidenceInterval> cis;
    for (const auto& t : config_.ci_targets) {
      if (!spine.Contains(t.geocode)) {
        throw DataError("ci target geocode '" + t.geocode + "' is not in the spine");
      }
      cis.push_back(CiFromNmf(index, spine, config_.universe, cat, t,
                              config_.ci_confidence));
    }
    Write("ci.csv", SerializeCis(cis));
  });
}

std::string SerializeCounts(const CountMap& counts) {
  std::ostringstream out;
  out << "geocode,cell,count\n";
  for (const auto& [g, v] : counts) {
    for (std::size_t c = 0; c < v.size(); ++c) {
      if (v[c] != 0) out << g << ',' << c << ',' << v[c] << '\n';
    }
  }
  return out.str();
}

CountMap ParseCounts(const std::string& text, const Spine& spine,
                     std::int64_t cells, const std::string& source) {
  const CsvTable table = ParseCsv(text, source);
  if (table.header != std::vector<std::string>{"geocode", "cell", "count"}) {
    throw DataError(source + ": expected header geocode,cell,count");
  }
  CountMap out;
  for (const auto& [g, u] : spine.units()) out[g].assign(cells, 0);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string at = source + ":" + std::to_string(table.line_numbers[i]);
    auto it = out.find(row[0]);
    if (it == out.end()) {
      throw DataError(at + ": unit '" + row[0] + "' is not in the spine");
    }
    const std::int64_t cell = ParseInt64(row[1], at);
    if (cell < 0 || cell >= cells) throw DataError(at + ": cell out of range");
    it->second[cell] = ParseInt64(row[2], at);
  }
  return out;
}

std::string SerializePriorRelease(const Tabulations& tabulations) {
  std::ostringstream out;
  out << "geocode,query_id,cell_index,value\n";
  for (const auto& [g, queries] : tabulations) {
    for (const auto& [q, values] : queries) {
      for (std::size_t j = 0; j < values.size(); ++j) {
        out << g << ',' << q << ',' << j << ',' << values[j] << '\n';
      }
    }
  }
  return out.str();
}

Tabulations ParsePriorRelease(const std::string& text,
                              const std::string& source) {
  const CsvTable table = ParseCsv(text, source);
  if (table.header !=
      std::vector<std::string>{"geocode", "query_id", "cell_index", "value"}) {
    throw DataError(source + ": expected header geocode,query_id,cell_index,value");
  }
  Tabulations out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string at = source + ":" + std::to_string(table.line_numbers[i]);
    const std::int64_t cell = ParseInt64(row[2], at);
    auto& values = out[row[0]][row[1]];
    if (cell != static_cast<std::int64_t>(values.size())) {
      throw DataError(at + ": cells must be listed in order from 0");
    }
    values.push_back(ParseInt64(row[3], at));
  }
  return out;
}

std::string DecimalString(const Rational& value) {
  using boost::multiprecision::cpp_int;
  const cpp_int den = boost::multiprecision::denominator(value);
  cpp_int rest = den;
  int twos = 0, fives = 0;
  while (rest % 2 == 0) rest /= 2, ++twos;
  while (rest % 5 == 0) rest /= 5, ++fives;
  if (rest != 1) return ToString(value);
  const int digits = std::max(twos, fives);
  cpp_int scaled = boost::multiprecision::numerator(value);
  for (int i = 0; i < digits; ++i) scaled *= 10;
  scaled /= den;
  const bool negative = scaled < 0;
  std::string s = (negative ? cpp_int(-scaled) : scaled).str();
  if (digits > 0) {
    if (static_cast<int>(s.size()) <= digits) {
      s = std::string(digits + 1 - s.size(), '0') + s;
    }
    s.insert(s.size() - digits, ".");
  }
  return (negative ? "-" : "") + s;
}

std::string ValidationReport(const RunConfig& config) {
  std::ostringstream out;
  out << "config " << config.name << " is valid\n";
  for (const auto& c : config.universe.components()) {
    out << "histogram " << c.name << ": " << c.schema->attribute_count()
        << " attributes, " << c.schema->cell_count() << " cells, "
        << c.schema->valid_count() << " valid\n";
  }
  for (const auto& n : config.notes) out << "note: " << n << "\n";
  out << "queries:";
  for (const auto& q : config.queries) {
    out << " " << q.group.id() << "(" << q.group.output_cells() << ")";
  }
  out << "\nspine levels:";
  for (const auto& l : config.spine_levels) out << " " << l;
  out << "\n";
  const Rho total = TotalRho(config.strategy);
  out << "total rho = " << DecimalString(total) << " (" << ToString(total)
      << ")\n";
  return out.str();
}

int RunCommand(const std::string& command, const std::string& config_path,
               const PipelineOptions& options, std::ostream& log) {
  static const std::set<std::string> kCommands = {
      "generate", "run", "measure", "postprocess", "metrics", "ci"};
  RunManifest fallback;
  fallback.command = command;
  std::optional<Pipeline> pipeline;
  auto fail = [&](ExitCode code, const std::string& message) {
    RunManifest& m = pipeline ? pipeline->manifest() : fallback;
    m.status = "failed";
    m.exit_code = static_cast<int>(code);
    m.error = message;
    m.failing_phase = pipeline && !pipeline->current_phase().empty()
                          ? pipeline->current_phase()
                          : "setup";
    log << "error (" << m.failing_phase << "): " << message << "\n";
    return static_cast<int>(code);
  };
  int code = 0;
  try {
    if (!kCommands.count(command)) {
      throw ValidationError("unknown command '" + command + "'");
    }
    pipeline.emplace(LoadConfig(config_path), options);
    pipeline->manifest().command = command;
    if (command == "generate") {
      pipeline->Generate();
    } else if (command == "run") {
      pipeline->Ingest();
      pipeline->Measure();
      pipeline->Postprocess();
    } else if (command == "measure") {
      pipeline->Ingest();
      pipeline->Measure();
    } else if (command == "postprocess") {
      pipeline->Postprocess();
    } else if (command == "metrics") {
      pipeline->Metrics();
    } else {
      pipeline->Ci();
    }
  } catch (const Error& e) {
    code = fail(e.code(), e.what());
  } catch (const std::exception& e) {
    code = fail(ExitCode::kSolver, std::string("internal error: ") + e.what());
  }
  RunManifest& m = pipeline ? pipeline->manifest() : fallback;
  for (const auto& w : m.warnings) log << "warning: " << w << "\n";
  try {
    std::filesystem::create_directories(options.out_dir);
    WriteFile((std::filesystem::path(options.out_dir) /
               ("manifest-" + command + ".json"))
                  .string(),
              m.ToJson());
  } catch (const std::exception& e) {
    log << "error: cannot write manifest: " << e.what() << "\n";
    if (code == 0) code = static_cast<int>(ExitCode::kIo);
  }
  return code;
}

}  // namespace topdown
