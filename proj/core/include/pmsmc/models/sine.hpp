#pragma once

// Sine diffusion dX = sin(X - theta) dt + dW observed as Y_k = X_{t_k} + eps_k,
// eps_k ~ N(0, obs_variance), at spacing delta.

#include "pmsmc/estimators.hpp"
#include "pmsmc/models/linear_gaussian.hpp"
#include "pmsmc/rml.hpp"
#include "pmsmc/smoother.hpp"

#include <cstdint>

namespace pmsmc {

struct SineSpec {
  double theta = kPi / 4.0;
  double obs_variance = 1.0;
  double delta = 0.5;
  double x0 = 0.0;             // start of simulated paths
  double prior_mean = 0.0;     // filter prior on X_0
  double prior_variance = 1.0;
  int gpe_replicates = 1;      // GPE draws averaged into one transition estimate
  bool zero_drift = false;     // alpha = 0: Brownian motion, for testing

  void validate() const;
};

/// Benchmark instance: theta = pi/4, n = 10 steps over [0, 5], 30 GPE replicates.
SineSpec sine_benchmark_spec();

GpeConfig sine_gpe_config(bool zero_drift = false);

/// Locally optimal Gaussian proposal: Euler prior N(x + delta sin(x - theta), delta)
/// combined with the Gaussian likelihood of y_next.
double sine_proposal_mean(const SineSpec& spec, double x, double y_next);
double sine_proposal_variance(const SineSpec& spec);

SsmDefinition sine_model(const SineSpec& spec);

/// Theta-indexed family for recursive maximum likelihood (param_dim = 1).
ModelFamily sine_family(const SineSpec& base);

/// max_l of the GPE envelope over the particles of cloud_k toward x_next; an
/// almost-sure bound on every (averaged) GPE draw.
ArBoundFn sine_ar_bound(const SineSpec& spec);

/// Exact-algorithm paths by default; `fine_euler` switches to Euler steps of 1e-4.
SimulatedData simulate_sine(const SineSpec& spec, int n, std::uint64_t seed, bool fine_euler = false);

}  // namespace pmsmc
