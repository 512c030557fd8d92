#pragma once

// Stochastic Lotka-Volterra predator-prey diffusion
//   dX = alpha(X) dt + diag(X) Gamma dW,
//   alpha(x) = (x1 (a10 - a11 x1 - a12 x2), x2 (-a20 + a21 x1 - a22 x2)),
// observed through log-normal abundance indices Y_i = c_i X_i exp(eps_i),
// eps ~ N(-diag(Sigma) / 2, Sigma).

#include "pmsmc/estimators.hpp"
#include "pmsmc/models/linear_gaussian.hpp"

#include <cstdint>
#include <vector>

namespace pmsmc {

struct LotkaVolterraSpec {
  double a10 = 2.0, a11 = 0.2, a12 = 1.0;
  double a20 = 2.0, a21 = 1.0, a22 = 0.2;
  Matrix Gamma = 0.1 * Matrix::Identity(2, 2);
  Vector c = Vector::Ones(2);
  Matrix Sigma = 0.05 * Matrix::Identity(2, 2);
  Vector x0 = Vector::Ones(2);
  double prior_log_sd = 0.1;  // filter prior: log X_0 ~ N(log x0 - sd^2/2, sd^2 I)
  double t_end = 3.0;
  int n_obs = 301;
  double intensity = 1.0;  // parametrix Poisson rate

  void validate() const;
  double delta() const { return t_end / (n_obs - 1); }
};

Vector lv_drift(const LotkaVolterraSpec& spec, VectorRef x);
Matrix lv_diffusion(const LotkaVolterraSpec& spec, VectorRef x);

ParametrixConfig lv_parametrix_config(const LotkaVolterraSpec& spec, double horizon);

/// Signed parametrix transition estimator, log-space locally optimal Gaussian
/// proposal and log-normal observation density.
SsmDefinition lotka_volterra_model(const LotkaVolterraSpec& spec);

/// Observation density of y given x.
double lv_obs_density(const LotkaVolterraSpec& spec, VectorRef x, VectorRef y);

/// Fine Euler paths (step 1e-4) sampled at the n_obs evenly spaced times on
/// [0, t_end]. PositivityViolation if an abundance falls below 1e-6.
SimulatedData simulate_lv(const LotkaVolterraSpec& spec, std::uint64_t seed, double euler_step = 1e-4);

}  // namespace pmsmc
