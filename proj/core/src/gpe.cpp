#include "pmsmc/estimators.hpp"
#include "pmsmc/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pmsmc {

namespace {

std::vector<double> sorted_uniform_times(int count, double horizon, RandomStream& rng) {
  std::vector<double> times(static_cast<std::size_t>(count));
  for (double& t : times) t = horizon * rng.uniform_open();
  std::sort(times.begin(), times.end());
  return times;
}

double poisson_rate(const GpeConfig& cfg, VectorRef theta) {
  const double rate = cfg.upper_bound(theta) - cfg.lower_bound(theta);
  if (!(rate > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "GPE requires upper_bound > lower_bound");
  }
  return rate;
}

// Advances a Brownian bridge pinned at (horizon, end) from (t_prev, v_prev)
// to time t, in place.
void bridge_advance(Vector& value, double& t_prev, double t, double horizon, VectorRef end,
                    RandomStream& rng) {
  const double remaining = horizon - t_prev;
  const double frac = (t - t_prev) / remaining;
  const double sd = std::sqrt((horizon - t) * (t - t_prev) / remaining);
  for (Eigen::Index c = 0; c < value.size(); ++c) {
    value[c] += frac * (end[c] - value[c]) + sd * rng.normal();
  }
  t_prev = t;
}

}  // namespace

BridgeSkeleton sample_brownian_bridge_at(VectorRef start, VectorRef end, double horizon,
                                         const std::vector<double>& times, RandomStream& rng) {
  if (!(horizon > 0.0)) throw Error(ErrorCode::BadTimes, "bridge horizon must be positive");
  if (start.size() != end.size()) throw Error(ErrorCode::DimensionMismatch, "bridge endpoints differ in size");
  double previous = 0.0;
  for (double t : times) {
    if (!(t > previous) || !(t < horizon)) {
      throw Error(ErrorCode::BadTimes, "bridge times must be strictly increasing inside (0, horizon)");
    }
    previous = t;
  }
  BridgeSkeleton skeleton{horizon, start, end, times, {}};
  skeleton.values.reserve(times.size());
  Vector value = start;
  double t_prev = 0.0;
  for (double t : times) {
    bridge_advance(value, t_prev, t, horizon, end, rng);
    skeleton.values.push_back(value);
  }
  return skeleton;
}

Vector bridge_value_at(const BridgeSkeleton& skeleton, double t, RandomStream& rng) {
  if (!(t > 0.0) || !(t < skeleton.horizon)) {
    throw Error(ErrorCode::BadTimes, "interpolation time outside (0, horizon)");
  }
  const auto it = std::lower_bound(skeleton.times.begin(), skeleton.times.end(), t);
  const auto idx = static_cast<std::size_t>(it - skeleton.times.begin());
  if (it != skeleton.times.end() && *it == t) return skeleton.values[idx];
  const double t_left = idx == 0 ? 0.0 : skeleton.times[idx - 1];
  const Vector& v_left = idx == 0 ? skeleton.start : skeleton.values[idx - 1];
  const double t_right = idx == skeleton.times.size() ? skeleton.horizon : skeleton.times[idx];
  const Vector& v_right = idx == skeleton.times.size() ? skeleton.end : skeleton.values[idx];
  const double span = t_right - t_left;
  const double frac = (t - t_left) / span;
  const double sd = std::sqrt((t - t_left) * (t_right - t) / span);
  Vector out = v_left + frac * (v_right - v_left);
  for (Eigen::Index c = 0; c < out.size(); ++c) out[c] += sd * rng.normal();
  return out;
}

void validate_gpe_bounds(const GpeConfig& cfg, VectorRef theta, const std::vector<Vector>& points) {
  const double lower = cfg.lower_bound(theta);
  const double upper = cfg.upper_bound(theta);
  if (!(upper > lower)) throw Error(ErrorCode::InvalidArgument, "GPE upper bound must exceed lower bound");
  for (const Vector& x : points) {
    const double phi = cfg.phi(theta, x);
    if (phi < -1e-12 || phi > upper - lower + 1e-12) {
      throw Error(ErrorCode::InvalidArgument,
                  "psi leaves [lower, upper] (phi = " + std::to_string(phi) + ")");
    }
  }
}

double gpe_envelope(const GpeConfig& cfg, VectorRef theta, VectorRef x, VectorRef y, double horizon) {
  const double lower = cfg.lower_bound(theta);
  return isotropic_normal_pdf(x - y, horizon) *
         std::exp(cfg.potential(theta, y) - cfg.potential(theta, x) - lower * horizon);
}

DensityDraw gpe_transition_estimate(const GpeConfig& cfg, VectorRef theta, VectorRef x, VectorRef y,
                                    double horizon, RandomStream& rng) {
  const double rate = poisson_rate(cfg, theta);
  const int kappa = rng.poisson(rate * horizon);
  const std::vector<double> times = sorted_uniform_times(kappa, horizon, rng);

  double product = 1.0;
  Vector value = x;
  double t_prev = 0.0;
  for (double t : times) {
    bridge_advance(value, t_prev, t, horizon, y, rng);
    product *= 1.0 - cfg.phi(theta, value) / rate;
  }
  return DensityDraw{gpe_envelope(cfg, theta, x, y, horizon) * product, kappa};
}

BridgeSkeleton sample_diffusion_bridge(const GpeConfig& cfg, VectorRef theta, VectorRef x, VectorRef y,
                                       double horizon, RandomStream& rng, long* proposals_used,
                                       double extra_time) {
  const double rate = poisson_rate(cfg, theta);
  const bool with_extra = extra_time > 0.0 && extra_time < horizon;
  for (long proposal = 1; proposal <= cfg.max_bridge_proposals; ++proposal) {
    const int kappa = rng.poisson(rate * horizon);
    std::vector<double> times = sorted_uniform_times(kappa, horizon, rng);
    std::vector<double> marks(times.size());
    for (double& u : marks) u = rate * rng.uniform();

    // Merge the untested extra time into the skeleton times.
    std::vector<double> all_times = times;
    std::vector<char> tested(times.size(), 1);
    if (with_extra) {
      const auto pos = std::lower_bound(all_times.begin(), all_times.end(), extra_time);
      const auto offset = pos - all_times.begin();
      all_times.insert(pos, extra_time);
      tested.insert(tested.begin() + offset, 0);
    }

    BridgeSkeleton skeleton{horizon, x, y, {}, {}};
    skeleton.times.reserve(all_times.size());
    skeleton.values.reserve(all_times.size());
    Vector value = x;
    double t_prev = 0.0;
    bool accepted = true;
    std::size_t mark = 0;
    for (std::size_t j = 0; j < all_times.size(); ++j) {
      bridge_advance(value, t_prev, all_times[j], horizon, y, rng);
      if (tested[j]) {
        if (cfg.phi(theta, value) >= marks[mark++]) {
          accepted = false;
          break;
        }
      }
      skeleton.times.push_back(all_times[j]);
      skeleton.values.push_back(value);
    }
    if (accepted) {
      if (proposals_used) *proposals_used = proposal;
      return skeleton;
    }
  }
  throw Error(ErrorCode::RejectionBudgetExceeded,
              "diffusion bridge rejected " + std::to_string(cfg.max_bridge_proposals) + " proposals");
}

Vector gpe_grad_log_deterministic(const GpeConfig& cfg, VectorRef theta, VectorRef x, VectorRef y,
                                  double horizon) {
  Vector out = cfg.grad_potential(theta, y) - cfg.grad_potential(theta, x);
  if (cfg.grad_lower_bound) out -= horizon * cfg.grad_lower_bound(theta);
  return out;
}

Vector gpe_grad_log_transition(const GpeConfig& cfg, VectorRef theta, VectorRef x, VectorRef y,
                               double horizon, RandomStream& rng) {
  if (!cfg.grad_potential || !cfg.grad_phi) {
    throw Error(ErrorCode::InvalidArgument, "GPE score estimator needs grad_potential and grad_phi");
  }
  const double u = horizon * rng.uniform_open();
  const BridgeSkeleton bridge = sample_diffusion_bridge(cfg, theta, x, y, horizon, rng, nullptr, u);
  const auto it = std::lower_bound(bridge.times.begin(), bridge.times.end(), u);
  const Vector& s_u = bridge.values[static_cast<std::size_t>(it - bridge.times.begin())];
  return gpe_grad_log_deterministic(cfg, theta, x, y, horizon) - horizon * cfg.grad_phi(theta, s_u);
}

Vector exact_algorithm_step(const GpeConfig& cfg, VectorRef theta, VectorRef x, double horizon,
                            RandomStream& rng) {
  if (!cfg.potential_sup) {
    throw Error(ErrorCode::InvalidArgument, "exact algorithm needs potential_sup");
  }
  const double sup_a = cfg.potential_sup(theta);
  const double rate = poisson_rate(cfg, theta);
  const double sd = std::sqrt(horizon);
  for (long proposal = 0; proposal < cfg.max_bridge_proposals; ++proposal) {
    Vector y = x + sd * rng.normal_vector(x.size());
    // Biased Brownian endpoint: density proportional to N(y; x, h) exp(A(y)).
    if (rng.uniform() >= std::exp(cfg.potential(theta, y) - sup_a)) continue;
    const int kappa = rng.poisson(rate * horizon);
    const std::vector<double> times = sorted_uniform_times(kappa, horizon, rng);
    Vector value = x;
    double t_prev = 0.0;
    bool accepted = true;
    for (double t : times) {
      bridge_advance(value, t_prev, t, horizon, y, rng);
      if (cfg.phi(theta, value) >= rate * rng.uniform()) {
        accepted = false;
        break;
      }
    }
    if (accepted) return y;
  }
  throw Error(ErrorCode::RejectionBudgetExceeded, "exact algorithm exhausted its proposal budget");
}

}  // namespace pmsmc
