#pragma once

// Datasets, preset model construction and the four CLI commands.

#include "pmsmc/cli/config.hpp"
#include "pmsmc/rml.hpp"
#include "pmsmc/smoother.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pmsmc::cli {

/// Columns: t,x_1..x_d,y_1..y_m. Hidden states are optional on input.
struct Dataset {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> observations;

  int n_steps() const { return static_cast<int>(observations.size()) - 1; }
  bool has_states() const { return !states.empty(); }
};

void write_dataset_csv(std::ostream& out, const Dataset& data);
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_file(const std::filesystem::path& path);

struct ModelBundle {
  SsmDefinition model;
  ArBoundFn ar_bound;    // empty when no a.s. bound is known
  ModelFamily family;    // empty for presets without a parameter family
  Vector theta;          // parameter of `model` within `family`
  int state_dim = 0;
  int obs_dim = 0;
};

ModelBundle build_model(const ExperimentConfig& cfg, const Dataset& data);
Dataset simulate_preset(const ExperimentConfig& cfg, std::uint64_t seed);

AdditiveFunctional build_functional(const ExperimentConfig& cfg, const ModelBundle& bundle,
                                    const Dataset& data);

/// Ground truth of the configured functional on the hidden states, if known.
std::optional<Vector> functional_truth(const ExperimentConfig& cfg, const Dataset& data);

/// Exact posterior mean of the configured functional (RTS on the lg preset).
std::optional<Vector> exact_posterior_mean(const ExperimentConfig& cfg, const Dataset& data);

/// Writes manifest JSON next to `file`: version, command, config, config hash
/// and seed. No timestamps, so identical runs give identical manifests.
void write_manifest(const std::filesystem::path& file, const std::string& command, const ExperimentConfig& cfg);

/// Each returns the path of the main CSV it wrote.
std::filesystem::path cmd_simulate(const ExperimentConfig& cfg);
std::filesystem::path cmd_smooth(const ExperimentConfig& cfg, const Dataset& data);
std::filesystem::path cmd_rml(const ExperimentConfig& cfg, const std::vector<Dataset>& datasets);
std::filesystem::path cmd_bench(const ExperimentConfig& cfg);

/// 0 success, 2 configuration, 3 numerical failure, 4 I/O.
int exit_code_for(ErrorCode code);

int backward_for_bench(const std::string& schedule, int n_particles);

}  // namespace pmsmc::cli
