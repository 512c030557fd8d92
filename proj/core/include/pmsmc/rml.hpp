#pragma once

// Recursive maximum likelihood: Robbins-Monro ascent on the score of the
// one-step predictive likelihood, with the tangent filter carried by backward
// statistics of the complete-data score functional.

#include "pmsmc/smoother.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace pmsmc {

using ModelFamily = std::function<SsmDefinition(VectorRef theta)>;

/// gamma_k = gamma0 for k <= burn_in, gamma0 / (k - burn_in)^kappa afterwards.
struct StepSizeSchedule {
  double gamma0 = 0.5;
  int burn_in = 300;
  double kappa = 0.6;

  double gamma(long k) const;
  void validate() const;
};

struct RmlState {
  Vector theta;
  ParticleCloud cloud;  // filter at step k - 1 with tangent statistics
  Vector last_observation;
  long k = 0;  // observations processed
  Vector polyak_sum;
  long polyak_count = 0;
  RngFactory rng{0};
};

struct RmlLogRow {
  long k = 0;
  Vector theta;
  Vector polyak;
  Vector score;
  double gamma = 0.0;
  double score_norm = 0.0;
  std::int64_t wall_time_ns = 0;
};

/// Complete-data score functional: increments grad log q_k(x, x') + grad log g_k(x, y_k),
/// the first from the model's plug-in estimator.
AdditiveFunctional score_functional(const SsmDefinition& model, const Vector& y_source);

/// Score of the predictive likelihood of y from a predictive cloud (weights
/// without the observation factor) whose backward statistics estimate the
/// tangent filter:
///   (eta[grad g] + eta[tau g] - eta[tau] eta[g]) / eta[g].
Vector score_increment(const SsmDefinition& model, const ParticleCloud& predictive, VectorRef y);

RmlState rml_init(Vector theta0, const SmootherConfig& cfg, std::uint64_t seed);

/// Processes one observation under the current iterate and updates theta.
RmlLogRow rml_step(const ModelFamily& family, RmlState& state, VectorRef y, const StepSizeSchedule& schedule,
                   const SmootherConfig& cfg);

/// Mean of the post-burn-in iterates; the current iterate before that.
Vector polyak_average(const RmlState& state);

/// Same quantity recomputed from a stored log.
Vector polyak_average(const std::vector<RmlLogRow>& log, int burn_in);

struct RmlResult {
  Vector theta;
  Vector polyak;
  std::vector<RmlLogRow> log;
};

RmlResult run_rml(const ModelFamily& family, const std::vector<Vector>& observations, Vector theta0,
                  const StepSizeSchedule& schedule, const SmootherConfig& cfg, std::uint64_t seed);

/// Columns: k,theta_1..theta_q,polyak_1..polyak_q,gamma,score_norm,wall_time_ns
void write_rml_log_csv(std::ostream& out, const std::vector<RmlLogRow>& log, bool header = true);

}  // namespace pmsmc
