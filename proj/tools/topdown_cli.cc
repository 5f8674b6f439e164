#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "topdown/config.h"
#include "topdown/errors.h"
#include "topdown/pipeline.h"

int main(int argc, char** argv) {
  CLI::App app{"TopDown disclosure avoidance pipeline"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir = ".";
  long long seed = -1;
  int workers = 0;
  bool noiseless = false;

  auto add_common = [&](CLI::App* sub, bool with_run_flags) {
    sub->add_option("--config", config_path, "configuration file")
        ->required();
    if (!with_run_flags) return;
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "seed (overrides the config)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--workers", workers, "worker threads")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--noiseless-debug", noiseless,
                  "inject zero noise (debugging only)");
  };
  CLI::App* validate = app.add_subcommand("validate", "check a configuration");
  add_common(validate, false);
  for (const char* name :
       {"generate", "run", "measure", "postprocess", "metrics", "ci"}) {
    add_common(app.add_subcommand(name), true);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(topdown::ExitCode::kValidation);
  }

  CLI::App* sub = app.get_subcommands().front();
  if (sub == validate) {
    try {
      std::cout << topdown::ValidationReport(topdown::LoadConfig(config_path));
      return 0;
    } catch (const topdown::Error& e) {
      std::cerr << "invalid: " << e.what() << "\n";
      return static_cast<int>(e.code());
    }
  }
  topdown::PipelineOptions options;
  options.out_dir = out_dir;
  if (seed >= 0) options.seed = static_cast<std::uint64_t>(seed);
  if (workers > 0) options.workers = workers;
  options.noiseless = noiseless;
  return topdown::RunCommand(sub->get_name(), config_path, options, std::cerr);
}
