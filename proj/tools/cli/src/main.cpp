#include "pmsmc/cli/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace pmsmc;
using namespace pmsmc::cli;

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> data_paths;
  CliOverrides overrides;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--preset", o.overrides.preset, "Model preset")
      ->check(CLI::IsMember(preset_names()));
  cmd->add_option("--seed", o.overrides.seed, "Root seed");
  cmd->add_option("--out", o.overrides.out_dir, "Output directory");
  cmd->add_option("--replicates", o.overrides.replicates, "Replicate count");
  cmd->add_option("--method", o.overrides.method, "BackwardIS | BackwardAR | PathSpace");
  cmd->add_option("--particles", o.overrides.particles, "Number of particles N");
  cmd->add_option("--backward", o.overrides.backward, "Backward sample count K");
  cmd->add_option("--steps", o.overrides.steps, "Number of transitions n");
}

ExperimentConfig resolve(const Options& o) {
  ExperimentConfig cfg = o.config_path.empty() ? parse_config(Json::object()) : load_config(o.config_path);
  apply_overrides(cfg, o.overrides);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-marginal online smoothing and recursive maximum likelihood"};
  app.require_subcommand(1);
  Options o;
  auto* simulate = app.add_subcommand("simulate", "Simulate a dataset from a preset");
  auto* smooth = app.add_subcommand("smooth", "Run smoothing replicates on a dataset");
  auto* rml = app.add_subcommand("rml", "Recursive maximum likelihood on one or more datasets");
  auto* bench = app.add_subcommand("bench", "Time BackwardIS against BackwardAR on the sine preset");
  auto* presets = app.add_subcommand("presets", "Print the preset defaults as JSON");
  for (auto* cmd : {simulate, smooth, rml, bench}) add_common(cmd, o);
  smooth->add_option("--data", o.data_paths, "Dataset CSV (simulated from the preset when absent)")
      ->check(CLI::ExistingFile);
  rml->add_option("--data", o.data_paths, "Dataset CSV; repeat for several datasets")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (presets->parsed()) {
    std::cout << all_preset_defaults().dump(2) << '\n';
    return 0;
  }

  try {
    const ExperimentConfig cfg = resolve(o);
    std::filesystem::path written;
    const auto datasets = [&] {
      std::vector<Dataset> out;
      for (const auto& p : o.data_paths) out.push_back(read_dataset_file(p));
      if (out.empty()) out.push_back(simulate_preset(cfg, cfg.seed));
      return out;
    };
    if (simulate->parsed()) {
      written = cmd_simulate(cfg);
    } else if (smooth->parsed()) {
      written = cmd_smooth(cfg, datasets().front());
    } else if (rml->parsed()) {
      written = cmd_rml(cfg, datasets());
    } else {
      written = cmd_bench(cfg);
    }
    std::cout << written.string() << '\n';
    return 0;
  } catch (const Error& e) {
    std::cerr << "pmsmc: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "pmsmc: " << e.what() << '\n';
    return 3;
  }
}
