#ifndef TOPDOWN_PIPELINE_H_
#define TOPDOWN_PIPELINE_H_

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "topdown/accountant.h"
#include "topdown/config.h"
#include "topdown/constraints.h"
#include "topdown/errors.h"
#include "topdown/spine.h"

namespace topdown {

inline constexpr const char* kVersion = "0.1.0";

struct PipelineOptions {
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;  // overrides the config seed
  std::optional<int> workers;         // overrides the config worker count
  bool noiseless = false;
};

struct PhaseTiming {
  std::string phase;
  double seconds = 0;
};

struct RunManifest {
  std::string command;
  std::string config_digest;
  std::string spine_digest;
  std::uint64_t seed = 0;
  bool noiseless = false;
  std::vector<PhaseTiming> phases;
  std::vector<std::string> warnings;
  std::vector<std::string> notes;
  std::vector<std::string> files_read;
  std::vector<std::string> files_written;
  std::optional<Accountant> ledger;
  std::string total_rho;  // over the spine, when known
  std::string status = "ok";
  std::string failing_phase;
  std::string error;
  int exit_code = 0;

  std::string ToJson() const;
};

// Phases of a run. Each phase reads only what earlier phases persisted in
// the output directory, except ingest and generate, which read the inputs.
class Pipeline {
 public:
  Pipeline(RunConfig config, PipelineOptions options);

  // Writes microdata.csv, gq_facilities.csv and prior_release.csv.
  void Generate();
  // Reads the confidential inputs; writes spine.txt, cef_units.csv,
  // unit_constraints.csv and gq_bounds.csv.
  void Ingest();
  // Writes nmf.csv and ledger.csv.
  void Measure();
  // Writes unit_histograms.csv, mdf.csv (plus mdf_units.csv with dual
  // histograms), constraint_report.csv and gq_residuals.csv.
  void Postprocess();
  // Writes metrics.csv and ledger.csv with the release entries appended.
  void Metrics();
  // Writes ci.csv.
  void Ci();

  RunManifest& manifest() { return manifest_; }
  const RunConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  // Phase currently executing, for failure reports.
  const std::string& current_phase() const { return current_phase_; }

 private:
  template <typename F>
  void RunPhase(const std::string& name, F&& body);
  std::string OutPath(const std::string& name) const;
  std::string InputPath(const std::string& configured,
                        const std::string& default_name) const;
  std::string Read(const std::string& path);
  void Write(const std::string& name, const std::string& contents);
  const QueryCatalog& catalog();
  Spine LoadSpine();
  CountMap LoadCounts(const std::string& name, const Spine& spine);
  std::string RunId() const;

  RunConfig config_;
  PipelineOptions options_;
  std::uint64_t seed_;
  int workers_;
  std::optional<QueryCatalog> catalog_;
  RunManifest manifest_;
  std::string current_phase_;
};

// geocode,cell,count for nonzero cells, units in geocode order.
std::string SerializeCounts(const CountMap& counts);
CountMap ParseCounts(const std::string& text, const Spine& spine,
                     std::int64_t cells, const std::string& source);

// geocode,query_id,cell_index,value
std::string SerializePriorRelease(const Tabulations& tabulations);
Tabulations ParsePriorRelease(const std::string& text,
                              const std::string& source);

// Exact decimal when the denominator divides a power of ten, else n/d.
std::string DecimalString(const Rational& value);

// Human-readable summary printed by `validate`, including the total ρ.
std::string ValidationReport(const RunConfig& config);

// Runs one CLI command (generate, run, measure, postprocess, metrics, ci)
// and writes manifest-<command>.json into the output directory, also on
// failure. Returns the process exit code.
int RunCommand(const std::string& command, const std::string& config_path,
               const PipelineOptions& options, std::ostream& log);

}  // namespace topdown

#endif  // TOPDOWN_PIPELINE_H_
