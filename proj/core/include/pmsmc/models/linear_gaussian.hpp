#pragma once

// Linear-Gaussian state space model and its exact Kalman / RTS recursions,
// used as a reference for every Monte Carlo component.

#include "pmsmc/rml.hpp"
#include "pmsmc/ssm.hpp"

#include <cstdint>
#include <vector>

namespace pmsmc {

struct LinearGaussianSpec {
  Matrix A;  // transition
  Matrix Q;
  Matrix H;  // observation
  Matrix R;
  Vector m0;
  Matrix P0;

  int state_dim() const { return static_cast<int>(A.rows()); }
  int obs_dim() const { return static_cast<int>(H.rows()); }
  void validate() const;

  static LinearGaussianSpec scalar(double a, double q, double h, double r, double m0 = 0.0, double p0 = 1.0);
};

struct SimulatedData {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> observations;
};

SimulatedData simulate_linear_gaussian(const LinearGaussianSpec& spec, int n, std::uint64_t seed);

/// Bootstrap proposal, rho_0 equal to the prior, and the exact transition
/// density as a deterministic positive "estimator".
SsmDefinition linear_gaussian_model(const LinearGaussianSpec& spec);

/// Peak of the Gaussian transition density, a valid BackwardAR bound.
ArBoundFn linear_gaussian_ar_bound(const LinearGaussianSpec& spec);

/// Scalar family theta = (a, h) around a base spec (Q, R, m0, P0 fixed), with
/// exact score callbacks for both the transition and the observation density.
ModelFamily linear_gaussian_family(const LinearGaussianSpec& base);
LinearGaussianSpec linear_gaussian_with(const LinearGaussianSpec& base, VectorRef theta);

struct KalmanResult {
  std::vector<Vector> predicted_means;  // X_k | Y_{0:k-1}
  std::vector<Matrix> predicted_covs;
  std::vector<Vector> filter_means;
  std::vector<Matrix> filter_covs;
  std::vector<Vector> smoother_means;
  std::vector<Matrix> smoother_covs;
  std::vector<double> log_predictive;  // log p(y_k | y_{0:k-1})
  double log_likelihood = 0.0;
};

KalmanResult kalman_rts(const LinearGaussianSpec& spec, const std::vector<Vector>& observations);

/// Central finite differences in theta of log p_theta(y_k | y_{0:k-1}), one
/// q-vector per k.
std::vector<Vector> kalman_log_predictive_gradients(const std::function<LinearGaussianSpec(VectorRef)>& family,
                                                    VectorRef theta, const std::vector<Vector>& observations,
                                                    double step = 1e-4);

}  // namespace pmsmc
