#pragma once

// Unbiased transition-density estimators for partially observed diffusions:
// the General Poisson Estimator (unit-diffusion SDEs with gradient drift),
// the matching score estimator built on exact diffusion bridges, and the
// signed parametrix estimator for general drift/diffusion pairs.

#include "pmsmc/random.hpp"
#include "pmsmc/ssm.hpp"
#include "pmsmc/types.hpp"

#include <functional>
#include <vector>

namespace pmsmc {

/// Finite-dimensional skeleton of a bridge from (0, start) to (horizon, end).
struct BridgeSkeleton {
  double horizon = 0.0;
  Vector start;
  Vector end;
  std::vector<double> times;   // strictly increasing, inside (0, horizon)
  std::vector<Vector> values;  // one per time
};

/// Brownian bridge (unit diffusion per coordinate) observed at `times`.
BridgeSkeleton sample_brownian_bridge_at(VectorRef start, VectorRef end, double horizon,
                                         const std::vector<double>& times, RandomStream& rng);

/// Value at an extra time t in (0, horizon), conditional on the skeleton
/// (Brownian interpolation between the neighbouring skeleton points).
Vector bridge_value_at(const BridgeSkeleton& skeleton, double t, RandomStream& rng);

// ---------------------------------------------------------------------------
// General Poisson Estimator.

/// dX = grad A(X) dt + dW with psi = (|grad A|^2 + lap A) / 2 bounded in
/// [lower_bound, upper_bound]. phi is psi - lower_bound.
struct GpeConfig {
  std::function<double(VectorRef theta, VectorRef x)> potential;
  std::function<Vector(VectorRef theta, VectorRef x)> drift;
  std::function<double(VectorRef theta, VectorRef x)> phi;
  std::function<double(VectorRef theta)> lower_bound;
  std::function<double(VectorRef theta)> upper_bound;

  // Parameter gradients, needed by the score estimator only.
  std::function<Vector(VectorRef theta, VectorRef x)> grad_potential;
  std::function<Vector(VectorRef theta, VectorRef x)> grad_phi;
  std::function<Vector(VectorRef theta)> grad_lower_bound;

  // sup_x A(theta, x); needed by the exact-algorithm path simulator only.
  std::function<double(VectorRef theta)> potential_sup;

  long max_bridge_proposals = 1'000'000;
};

/// Checks lower_bound <= psi <= upper_bound at the supplied points and
/// upper_bound > lower_bound. Throws InvalidArgument on violation.
void validate_gpe_bounds(const GpeConfig& cfg, VectorRef theta, const std::vector<Vector>& points);

/// Positive unbiased estimate of the transition density over `horizon`.
/// kappa ~ Poisson((upper - lower) * horizon) bridge evaluations.
DensityDraw gpe_transition_estimate(const GpeConfig& cfg, VectorRef theta, VectorRef x, VectorRef y,
                                    double horizon, RandomStream& rng);

/// Deterministic envelope phi_h(x - y) exp(A(y) - A(x) - lower * h) that
/// bounds every GPE draw for the pair (x, y).
double gpe_envelope(const GpeConfig& cfg, VectorRef theta, VectorRef x, VectorRef y, double horizon);

/// Exact draw of the diffusion bridge by Poisson thinning of Brownian bridge
/// proposals. The returned skeleton holds the accepted Poisson times, plus
/// `extra_time` when it lies in (0, horizon).
BridgeSkeleton sample_diffusion_bridge(const GpeConfig& cfg, VectorRef theta, VectorRef x, VectorRef y,
                                       double horizon, RandomStream& rng, long* proposals_used = nullptr,
                                       double extra_time = -1.0);

/// Unbiased estimate of grad_theta log q_h(x, y):
///   grad A(y) - grad A(x) - grad lower * h - h * grad phi(s_U),
/// with s an exact diffusion bridge and U uniform on (0, h).
Vector gpe_grad_log_transition(const GpeConfig& cfg, VectorRef theta, VectorRef x, VectorRef y,
                               double horizon, RandomStream& rng);

/// Deterministic part of the score estimator (everything but the bridge term).
Vector gpe_grad_log_deterministic(const GpeConfig& cfg, VectorRef theta, VectorRef x, VectorRef y,
                                  double horizon);

/// One exact-algorithm (EA1) transition of the diffusion over `horizon`.
/// Requires potential_sup.
Vector exact_algorithm_step(const GpeConfig& cfg, VectorRef theta, VectorRef x, double horizon,
                            RandomStream& rng);

// ---------------------------------------------------------------------------
// Parametrix estimator.

/// dX = alpha(X) dt + sigma(X) dW with gamma = sigma sigma^T. The Kolmogorov
/// operator difference needs div alpha, the vector v_l = sum_i d_i gamma_il and
/// the scalar sum_{il} d_i d_l gamma_il; empty callbacks mean "identically
/// zero" (constant diffusion).
struct ParametrixConfig {
  std::function<Vector(VectorRef x)> drift;
  std::function<double(VectorRef x)> drift_divergence;
  std::function<Matrix(VectorRef x)> diffusion;
  std::function<Vector(VectorRef x)> diffusion_cov_divergence;
  std::function<double(VectorRef x)> diffusion_cov_second_divergence;
  double intensity = 1.0;  // Poisson rate of the weight-update times
  double horizon = 1.0;
};

/// Density of the Euler proposal N(x + u alpha(x), u gamma(x)) at z.
double euler_density(const ParametrixConfig& cfg, VectorRef x, VectorRef z, double u);
double log_euler_density(const ParametrixConfig& cfg, VectorRef x, VectorRef z, double u);

/// Signed unbiased estimate of the transition density over cfg.horizon. The
/// final Euler factor is returned as log_scale.
DensityDraw parametrix_transition_estimate(const ParametrixConfig& cfg, VectorRef x, VectorRef y,
                                           RandomStream& rng);

/// The weight factor rho(x, z, u) = 1 + (K - K_prop) m(x, ., u)(z) / (lambda m(x, z, u)).
double parametrix_rho(const ParametrixConfig& cfg, VectorRef x, VectorRef z, double u);

}  // namespace pmsmc
