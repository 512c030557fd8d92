#pragma once

// Stochastic recurrent network:
//   X_0 ~ N(0, Sigma),  X_k = tanh(W1 Y_{k-1} + W2 X_{k-1} + b + eta_k),
//   Y_k = W3 X_k + c + eps_k,  eta ~ N(0, Q), eps ~ N(0, R), all diagonal.

#include "pmsmc/models/linear_gaussian.hpp"
#include "pmsmc/ssm.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace pmsmc {

struct RnnSsmSpec {
  Matrix W1;  // d x m
  Matrix W2;  // d x d
  Matrix W3;  // m x d
  Vector b;   // d
  Vector c;   // m
  Vector sigma_diag;  // initial variance
  Vector q_diag;      // state noise variance
  Vector r_diag;      // observation noise variance

  int state_dim() const { return static_cast<int>(W2.rows()); }
  int obs_dim() const { return static_cast<int>(W3.rows()); }
  void validate() const;
};

/// Seeded Gaussian weights scaled by 1/sqrt(fan_in), small biases, and the
/// given common noise variance on Sigma, Q and R.
RnnSsmSpec synthesize_rnn_spec(int state_dim, int obs_dim, std::uint64_t seed, double variance = 0.1);

/// Presets "rnn8", "rnn32", "rnn64".
RnnSsmSpec rnn_preset(int state_dim, std::uint64_t weight_seed = 2021);

SimulatedData simulate_rnn_ssm(const RnnSsmSpec& spec, int n, std::uint64_t seed);

/// Density of X_k given (X_{k-1}, Y_{k-1}) by change of variables through atanh.
double rnn_transition_density(const RnnSsmSpec& spec, VectorRef x, VectorRef y_prev, VectorRef x_next);

/// Bootstrap filter on the given observation sequence (the transition out of
/// step k reads Y_k); the exact density is exposed as a positive estimator.
SsmDefinition rnn_model(const RnnSsmSpec& spec, std::shared_ptr<const std::vector<Vector>> observations);

}  // namespace pmsmc
