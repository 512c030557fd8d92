#pragma once

#include "pmsmc/random.hpp"
#include "pmsmc/types.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace pmsmc {

/// One realization of an unbiased transition-density estimator. The value may
/// be negative for signed estimators; positivity is restored downstream by the
/// Wald loops of the smoother.
struct DensityDraw {
  double value = 0.0;
  // Number of auxiliary Poisson events consumed (diagnostics only).
  int aux_events = 0;
  // The estimate is value * exp(log_scale); lets sharply peaked densities
  // avoid underflow. Zero for estimators that return the value directly.
  double log_scale = 0.0;

  double linear() const { return log_scale == 0.0 ? value : value * std::exp(log_scale); }
};

/// Pluggable state space model. Densities are with respect to Lebesgue
/// measure. Time indices are those of the observation grid: step k maps
/// x_k to x_{k+1}.
struct SsmDefinition {
  int state_dim = 1;
  int obs_dim = 1;
  int param_dim = 1;

  // x_0 ~ rho_0 and its importance ratio chi(x) / rho_0(x).
  std::function<Vector(RandomStream&)> initial_sampler;
  std::function<double(VectorRef x)> initial_density_ratio;

  // Proposal kernel p_k(x_k, .), allowed to look at y_{k+1}.
  std::function<Vector(int k, VectorRef x, VectorRef y_next, RandomStream&)> proposal_sampler;
  std::function<double(int k, VectorRef x, VectorRef x_next, VectorRef y_next)> proposal_density;

  // g_k(x_k, y_k) and, for recursive maximum likelihood, its theta-gradient.
  std::function<double(int k, VectorRef x, VectorRef y)> obs_density;
  std::function<Vector(int k, VectorRef x, VectorRef y)> obs_density_grad;

  // Joint draw of the auxiliary variable and the transition-density estimate
  // for the pair (x_k, x_{k+1}).
  std::function<DensityDraw(int k, VectorRef x, VectorRef x_next, RandomStream&)> transition_estimator;
  bool transition_estimator_is_positive = false;

  // Unbiased estimate of grad_theta log q_k(x_k, x_{k+1}); RML only.
  std::function<Vector(int k, VectorRef x, VectorRef x_next, RandomStream&)> grad_log_transition_estimator;

  /// Throws InvalidArgument when a mandatory callback is missing.
  void validate() const;
  bool supports_score() const {
    return static_cast<bool>(obs_density_grad) && static_cast<bool>(grad_log_transition_estimator);
  }
};

/// h_{0:n}(x_{0:n}) = sum_k h_k(x_k, x_{k+1}). The increment callback adds
/// scale * h_k(x_k, x_{k+1}) into `out`, so sparse functionals (one block of a
/// long trajectory vector) stay O(d) per call.
struct AdditiveFunctional {
  int out_dim = 1;
  std::function<void(int k, VectorRef x, VectorRef x_next, RandomStream& rng, double scale,
                     Eigen::Ref<Vector> out)>
      add_increment;

  Vector increment(int k, VectorRef x, VectorRef x_next, RandomStream& rng) const;
};

/// Weighted particle system at one time step. Particles and backward
/// statistics are stored column-wise (particle i is column i).
struct ParticleCloud {
  int step = 0;
  Matrix particles;       // d x N
  Vector weights;         // N
  Matrix backward_stats;  // d' x N
  std::vector<int> ancestors;

  int size() const { return static_cast<int>(weights.size()); }
  double total_weight() const { return weights.sum(); }
};

// ---------------------------------------------------------------------------
// Weight and index utilities.

Vector normalize_weights(const Vector& weights);

/// Sum of squared-weight effective sample size, (sum w)^2 / sum w^2.
double ess(const Vector& weights);

Vector weighted_mean(const ParticleCloud& cloud, const std::function<Vector(VectorRef)>& h);

/// Inverse-CDF sampler over {0, ..., N-1}; building it validates the weights.
class CategoricalSampler {
 public:
  explicit CategoricalSampler(const Vector& weights);
  int sample(RandomStream& rng) const;
  int size() const { return static_cast<int>(cdf_.size()); }

 private:
  std::vector<double> cdf_;
};

std::vector<int> multinomial_indices(const Vector& probabilities, int count, RandomStream& rng);

// ---------------------------------------------------------------------------
// Common functionals.

/// E[X_{k*} | Y_{0:n}]: contributes x_0 at k = 0 when k* = 0, otherwise the
/// arriving state x_{k+1} when k + 1 = k*.
AdditiveFunctional state_at(int state_dim, int target_step);

/// Several state_at functionals stacked into one output vector.
AdditiveFunctional states_at(int state_dim, const std::vector<int>& target_steps);

/// scale * sum_{k=0}^{n} x_k.
AdditiveFunctional cumulative_state(int state_dim, int horizon, double scale = 1.0);

/// All states x_0..x_n stacked into a d * (n + 1) vector.
AdditiveFunctional state_trajectory(int state_dim, int horizon);

/// h_k = 1, so the smoothed value after n steps is exactly n.
AdditiveFunctional step_counter();

}  // namespace pmsmc
