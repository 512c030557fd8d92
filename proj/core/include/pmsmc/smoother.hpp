#pragma once

// Random-weight particle filtering with Wald-positivised weights and online
// smoothing of additive functionals through per-particle backward statistics.
// Three backward updates are provided: importance sampling (BackwardIS), exact
// accept-reject sampling of the backward kernel (BackwardAR), and the
// ancestral-line path-space smoother (PathSpace).

#include "pmsmc/random.hpp"
#include "pmsmc/ssm.hpp"
#include "pmsmc/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace pmsmc {

enum class SmootherMethod { BackwardIS, BackwardAR, PathSpace };

std::string to_string(SmootherMethod method);
SmootherMethod parse_smoother_method(const std::string& name);

/// Almost-sure bound on every transition draw q(xi_k^l, x_next) over l.
using ArBoundFn = std::function<double(int k, const ParticleCloud& cloud_k, VectorRef x_next)>;

struct SmootherConfig {
  int n_particles = 100;
  int n_backward = 10;
  SmootherMethod method = SmootherMethod::BackwardIS;
  int wald_max_rounds = 1000;
  long ar_max_proposals = 1'000'000;
  ArBoundFn ar_bound;  // required by BackwardAR
  int threads = 1;

  void validate(const SsmDefinition& model) const;
};

/// ceil(N^0.6) backward samples.
int default_backward_count(int n_particles);

struct BackwardDraw {
  int index = 0;
  double weight = 0.0;
};

struct BackwardSample {
  std::vector<BackwardDraw> draws;
  int rounds = 0;
  long estimator_calls = 0;
};

struct PropagationStats {
  int rounds = 0;
  long estimator_calls = 0;
};

struct StepDiagnostics {
  int step = 0;
  double ess = 0.0;
  int wald_rounds_filter = 0;
  double mean_wald_rounds_backward = 0.0;  // mean AR proposals per draw for BackwardAR
  long estimator_calls = 0;
  std::int64_t wall_time_ns = 0;
};

/// N draws from rho_0 with weights chi / rho_0 and zero backward statistics of
/// dimension stats_dim. The observation y_0 is not yet accounted for.
ParticleCloud init_filter(const SsmDefinition& model, const SmootherConfig& cfg, const RngFactory& rng,
                          int stats_dim = 0);

/// Multiplies every weight by g_k(xi_k, y_k), k = cloud.step.
void apply_observation(const SsmDefinition& model, ParticleCloud& cloud, VectorRef y);

/// Selection and mutation to step k + 1 with Wald-positivised weights
/// sum_r q_r / p (no observation factor). Backward statistics are zeroed.
ParticleCloud propagate_predictive(const SsmDefinition& model, const ParticleCloud& cloud_k,
                                   VectorRef y_next, const SmootherConfig& cfg, const RngFactory& rng,
                                   PropagationStats* stats = nullptr);

/// propagate_predictive followed by apply_observation with y_{k+1}.
ParticleCloud propagate_wald(const SsmDefinition& model, const ParticleCloud& cloud_k, VectorRef y_next,
                             const SmootherConfig& cfg, const RngFactory& rng,
                             PropagationStats* stats = nullptr);

/// K backward indices drawn proportionally to the weights of cloud_k, each
/// with a Wald-positivised sum of transition-density draws toward x_next.
BackwardSample backward_weights_wald(const SsmDefinition& model, const ParticleCloud& cloud_k,
                                     VectorRef x_next, const SmootherConfig& cfg,
                                     const CategoricalSampler& ancestors, RandomStream& rng);
BackwardSample backward_weights_wald(const SsmDefinition& model, const ParticleCloud& cloud_k,
                                     VectorRef x_next, const SmootherConfig& cfg, RandomStream& rng);

/// Self-normalised importance sampling update of one backward statistic.
Vector update_backward_stats_is(const ParticleCloud& cloud_k, VectorRef x_next,
                                const std::vector<BackwardDraw>& draws,
                                const AdditiveFunctional& functional, RandomStream& rng);

/// Exact accept-reject backward sampling; returns the unweighted average.
/// `proposals` receives the number of candidates examined.
Vector update_backward_stats_ar(const SsmDefinition& model, const ParticleCloud& cloud_k,
                                VectorRef x_next, const SmootherConfig& cfg,
                                const CategoricalSampler& ancestors, RandomStream& rng,
                                const AdditiveFunctional& functional, long* proposals = nullptr);

struct BackwardUpdateStats {
  double mean_rounds = 0.0;
  long estimator_calls = 0;
};

/// Fills cloud_next.backward_stats from cloud_k according to cfg.method.
void update_backward_statistics(const SsmDefinition& model, const ParticleCloud& cloud_k,
                                ParticleCloud& cloud_next, const AdditiveFunctional& functional,
                                const SmootherConfig& cfg, const RngFactory& rng,
                                BackwardUpdateStats* stats = nullptr);

/// sum_i (w_i / W) tau_i.
Vector smoothing_estimate(const ParticleCloud& cloud);

/// Online driver: start() with y_0, then advance() once per observation.
class OnlineSmoother {
 public:
  OnlineSmoother(SsmDefinition model, AdditiveFunctional functional, SmootherConfig cfg,
                 std::uint64_t seed);

  void start(VectorRef y0);
  void advance(VectorRef y);
  Vector estimate() const { return smoothing_estimate(cloud_); }

  const ParticleCloud& cloud() const { return cloud_; }
  const std::vector<StepDiagnostics>& trace() const { return trace_; }
  long estimator_calls() const { return estimator_calls_; }

 private:
  SsmDefinition model_;
  AdditiveFunctional functional_;
  SmootherConfig cfg_;
  RngFactory rng_;
  ParticleCloud cloud_;
  std::vector<StepDiagnostics> trace_;
  long estimator_calls_ = 0;
  bool started_ = false;
};

struct SmoothingResult {
  Vector estimate;
  std::vector<StepDiagnostics> trace;
  long estimator_calls = 0;
  std::int64_t wall_time_ns = 0;
};

SmoothingResult smooth_online(const SsmDefinition& model, const AdditiveFunctional& functional,
                              const std::vector<Vector>& observations, const SmootherConfig& cfg,
                              std::uint64_t seed);

/// Same filter, with backward statistics carried along ancestral lines.
SmoothingResult path_space_smoother(const SsmDefinition& model, const AdditiveFunctional& functional,
                                    const std::vector<Vector>& observations, const SmootherConfig& cfg,
                                    std::uint64_t seed);

/// Columns: step,ess,wald_rounds_filter,mean_wald_rounds_backward,wall_time_ns
void write_trace_csv(std::ostream& out, const std::vector<StepDiagnostics>& trace);

}  // namespace pmsmc
