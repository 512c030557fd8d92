#include "pmsmc/ssm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pmsmc {

namespace {

double checked_sum(const Vector& weights) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    const double w = weights[i];
    if (!std::isfinite(w)) {
      throw Error(ErrorCode::NonFiniteWeight, "weight " + std::to_string(i) + " is not finite");
    }
    if (w < 0.0) {
      throw Error(ErrorCode::InvalidArgument, "weight " + std::to_string(i) + " is negative");
    }
    total += w;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::AllZeroWeights, "every weight is zero");
  if (!std::isfinite(total)) throw Error(ErrorCode::NonFiniteWeight, "weight sum overflowed");
  return total;
}

}  // namespace

void SsmDefinition::validate() const {
  auto require = [](bool present, const char* name) {
    if (!present) throw Error(ErrorCode::InvalidArgument, std::string("model is missing ") + name);
  };
  require(state_dim > 0 && obs_dim > 0 && param_dim > 0, "positive dimensions");
  require(static_cast<bool>(initial_sampler), "initial_sampler");
  require(static_cast<bool>(initial_density_ratio), "initial_density_ratio");
  require(static_cast<bool>(proposal_sampler), "proposal_sampler");
  require(static_cast<bool>(proposal_density), "proposal_density");
  require(static_cast<bool>(obs_density), "obs_density");
  require(static_cast<bool>(transition_estimator), "transition_estimator");
}

Vector AdditiveFunctional::increment(int k, VectorRef x, VectorRef x_next, RandomStream& rng) const {
  Vector out = Vector::Zero(out_dim);
  add_increment(k, x, x_next, rng, 1.0, out);
  return out;
}

Vector normalize_weights(const Vector& weights) {
  const double total = checked_sum(weights);
  return weights / total;
}

double ess(const Vector& weights) {
  const double total = checked_sum(weights);
  return total * total / weights.squaredNorm();
}

Vector weighted_mean(const ParticleCloud& cloud, const std::function<Vector(VectorRef)>& h) {
  const double total = checked_sum(cloud.weights);
  Vector acc;
  for (int i = 0; i < cloud.size(); ++i) {
    const double w = cloud.weights[i];
    Vector value = h(cloud.particles.col(i));
    if (i == 0) acc = Vector::Zero(value.size());
    if (w != 0.0) acc += w * value;
  }
  return acc / total;
}

CategoricalSampler::CategoricalSampler(const Vector& weights) {
  const double total = checked_sum(weights);
  cdf_.resize(static_cast<std::size_t>(weights.size()));
  double running = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    running += weights[i];
    cdf_[static_cast<std::size_t>(i)] = running / total;
  }
  cdf_.back() = 1.0;
}

int CategoricalSampler::sample(RandomStream& rng) const {
  const double u = rng.uniform();
  // First index whose cumulative mass exceeds u; zero-mass entries are skipped.
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) --it;
  return static_cast<int>(it - cdf_.begin());
}

std::vector<int> multinomial_indices(const Vector& probabilities, int count, RandomStream& rng) {
  const CategoricalSampler sampler(probabilities);
  std::vector<int> out(static_cast<std::size_t>(std::max(count, 0)));
  for (int& index : out) index = sampler.sample(rng);
  return out;
}

AdditiveFunctional state_at(int state_dim, int target_step) {
  return states_at(state_dim, {target_step});
}

AdditiveFunctional states_at(int state_dim, const std::vector<int>& target_steps) {
  AdditiveFunctional f;
  f.out_dim = state_dim * static_cast<int>(target_steps.size());
  f.add_increment = [state_dim, target_steps](int k, VectorRef x, VectorRef x_next, RandomStream&,
                                              double scale, Eigen::Ref<Vector> out) {
    for (std::size_t b = 0; b < target_steps.size(); ++b) {
      const int target = target_steps[b];
      const Eigen::Index offset = static_cast<Eigen::Index>(b) * state_dim;
      if (k == 0 && target == 0) out.segment(offset, state_dim) += scale * x;
      if (k + 1 == target) out.segment(offset, state_dim) += scale * x_next;
    }
  };
  return f;
}

AdditiveFunctional cumulative_state(int state_dim, int horizon, double scale) {
  AdditiveFunctional f;
  f.out_dim = state_dim;
  f.add_increment = [horizon, factor = scale](int k, VectorRef x, VectorRef x_next, RandomStream&,
                                              double s, Eigen::Ref<Vector> out) {
    if (k == 0) out += (s * factor) * x;
    if (k < horizon) out += (s * factor) * x_next;
  };
  return f;
}

AdditiveFunctional state_trajectory(int state_dim, int horizon) {
  AdditiveFunctional f;
  f.out_dim = state_dim * (horizon + 1);
  f.add_increment = [state_dim, horizon](int k, VectorRef x, VectorRef x_next, RandomStream&,
                                         double scale, Eigen::Ref<Vector> out) {
    if (k == 0) out.segment(0, state_dim) += scale * x;
    if (k < horizon) out.segment(static_cast<Eigen::Index>(k + 1) * state_dim, state_dim) += scale * x_next;
  };
  return f;
}

AdditiveFunctional step_counter() {
  AdditiveFunctional f;
  f.out_dim = 1;
  f.add_increment = [](int, VectorRef, VectorRef, RandomStream&, double scale,
                       Eigen::Ref<Vector> out) { out[0] += scale; };
  return f;
}

}  // namespace pmsmc
