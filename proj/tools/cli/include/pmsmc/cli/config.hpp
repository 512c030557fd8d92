#pragma once

// Experiment configuration: a compiled preset (model parameters plus run
// defaults) merged with a JSON config file and then command-line overrides.

#include "pmsmc/smoother.hpp"
#include "pmsmc/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pmsmc::cli {

using Json = nlohmann::json;

enum class FunctionalKind { StateAt, CumulativeState, Score };

struct FunctionalSpec {
  FunctionalKind kind = FunctionalKind::StateAt;
  std::vector<int> steps{0};  // StateAt targets
};

struct RmlSettings {
  double gamma0 = 0.5;
  int burn_in = 300;
  double kappa = 0.6;
  std::vector<double> kappa_sweep;       // empty: kappa only
  std::vector<std::vector<double>> starts;  // explicit starting points
  int random_starts = 0;                 // drawn uniformly on [start_low, start_high]
  double start_low = 0.0;
  double start_high = 2.0 * kPi;
  int log_every = 1;
};

struct BenchSettings {
  std::vector<int> particles{50, 100, 200, 500, 1000, 2000};
  std::vector<std::string> methods{"BackwardIS", "BackwardAR"};
  std::string is_backward = "n_over_10";  // n_over_10 | pow0.5 | pow0.6 | <integer>
  int ar_backward = 2;
};

struct ExperimentConfig {
  std::string preset = "sine";
  Json model;  // preset parameters after overrides
  int n_steps = 10;
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds;  // one per replicate; derived from seed when empty
  int replicates = 1;
  int n_particles = 100;
  std::vector<int> backward{10};
  std::vector<SmootherMethod> methods{SmootherMethod::BackwardIS};
  int threads = 1;
  long ar_max_proposals = 1'000'000;
  int wald_max_rounds = 1000;
  FunctionalSpec functional;
  RmlSettings rml;
  BenchSettings bench;
  std::string out_dir = "results";

  void validate() const;
  std::uint64_t replicate_seed(int replicate) const;
  Json to_json() const;
};

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> replicates;
  std::optional<std::string> method;
  std::optional<int> particles;
  std::optional<int> backward;
  std::optional<int> steps;
  std::optional<std::string> preset;
};

std::vector<std::string> preset_names();

/// Compiled defaults of a preset, in the layout of config/presets.json.
Json preset_defaults(const std::string& name);

/// All presets keyed by name.
Json all_preset_defaults();

/// Parses a config document. Unknown keys are a ConfigError so typos do not
/// silently fall back to defaults.
ExperimentConfig parse_config(const Json& doc);

ExperimentConfig load_config(const std::string& path);

void apply_overrides(ExperimentConfig& cfg, const CliOverrides& overrides);

/// 64-bit FNV-1a of the canonical JSON dump.
std::uint64_t config_hash(const Json& doc);

}  // namespace pmsmc::cli
