#include "pmsmc/models/sine.hpp"
#include "pmsmc/gaussian.hpp"

#include <cmath>
#include <memory>

namespace pmsmc {

namespace {

constexpr double kLowerBound = -0.5;
constexpr double kUpperBound = 1.0;
constexpr double kEulerStep = 1e-4;

Vector scalar(double v) { return Vector::Constant(1, v); }

}  // namespace

void SineSpec::validate() const {
  if (!(obs_variance > 0.0) || !(delta > 0.0) || !(prior_variance > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "sine spec variances and spacing must be positive");
  }
  if (gpe_replicates < 1) throw Error(ErrorCode::InvalidArgument, "gpe_replicates must be at least 1");
  if (!std::isfinite(theta) || !std::isfinite(x0)) throw Error(ErrorCode::InvalidArgument, "non-finite sine spec");
}

SineSpec sine_benchmark_spec() {
  SineSpec s;
  s.gpe_replicates = 30;
  return s;
}

GpeConfig sine_gpe_config(bool zero_drift) {
  GpeConfig cfg;
  if (zero_drift) {
    cfg.potential = [](VectorRef, VectorRef) { return 0.0; };
    cfg.drift = [](VectorRef, VectorRef x) { return Vector::Zero(x.size()); };
    cfg.phi = [](VectorRef, VectorRef) { return 0.0; };
    cfg.lower_bound = [](VectorRef) { return 0.0; };
    cfg.upper_bound = [](VectorRef) { return 1.0; };
    cfg.grad_potential = [](VectorRef theta, VectorRef) { return Vector::Zero(theta.size()); };
    cfg.grad_phi = [](VectorRef theta, VectorRef) { return Vector::Zero(theta.size()); };
    cfg.grad_lower_bound = [](VectorRef theta) { return Vector::Zero(theta.size()); };
    cfg.potential_sup = [](VectorRef) { return 0.0; };
    return cfg;
  }
  cfg.potential = [](VectorRef theta, VectorRef x) { return -std::cos(x[0] - theta[0]); };
  cfg.drift = [](VectorRef theta, VectorRef x) { return scalar(std::sin(x[0] - theta[0])); };
  cfg.phi = [](VectorRef theta, VectorRef x) {
    const double u = x[0] - theta[0];
    const double s = std::sin(u);
    return 0.5 * (s * s + std::cos(u)) - kLowerBound;
  };
  cfg.lower_bound = [](VectorRef) { return kLowerBound; };
  cfg.upper_bound = [](VectorRef) { return kUpperBound; };
  cfg.grad_potential = [](VectorRef theta, VectorRef x) { return scalar(-std::sin(x[0] - theta[0])); };
  cfg.grad_phi = [](VectorRef theta, VectorRef x) {
    const double u = x[0] - theta[0];
    const double s = std::sin(u);
    return scalar(-(s * std::cos(u) - 0.5 * s));
  };
  cfg.grad_lower_bound = [](VectorRef) { return scalar(0.0); };
  cfg.potential_sup = [](VectorRef) { return 1.0; };
  return cfg;
}

double sine_proposal_variance(const SineSpec& spec) {
  return spec.delta * spec.obs_variance / (spec.delta + spec.obs_variance);
}

double sine_proposal_mean(const SineSpec& spec, double x, double y_next) {
  const double drift = spec.zero_drift ? 0.0 : std::sin(x - spec.theta);
  const double euler_mean = x + spec.delta * drift;
  return sine_proposal_variance(spec) * (euler_mean / spec.delta + y_next / spec.obs_variance);
}

SsmDefinition sine_model(const SineSpec& spec) {
  spec.validate();
  auto gpe = std::make_shared<const GpeConfig>(sine_gpe_config(spec.zero_drift));
  const Vector theta = scalar(spec.theta);
  const double prop_var = sine_proposal_variance(spec);
  const double prop_sd = std::sqrt(prop_var);

  SsmDefinition m;
  m.state_dim = 1;
  m.obs_dim = 1;
  m.param_dim = 1;
  m.initial_sampler = [spec](RandomStream& rng) {
    return scalar(spec.prior_mean + std::sqrt(spec.prior_variance) * rng.normal());
  };
  m.initial_density_ratio = [](VectorRef) { return 1.0; };
  m.proposal_sampler = [spec, prop_sd](int, VectorRef x, VectorRef y_next, RandomStream& rng) {
    return scalar(sine_proposal_mean(spec, x[0], y_next[0]) + prop_sd * rng.normal());
  };
  m.proposal_density = [spec, prop_var](int, VectorRef x, VectorRef x_next, VectorRef y_next) {
    return std::exp(normal_log_pdf(x_next[0], sine_proposal_mean(spec, x[0], y_next[0]), prop_var));
  };
  m.obs_density = [spec](int, VectorRef x, VectorRef y) {
    return std::exp(normal_log_pdf(y[0], x[0], spec.obs_variance));
  };
  m.obs_density_grad = [](int, VectorRef, VectorRef) { return Vector::Zero(1); };
  const int reps = spec.gpe_replicates;
  const double delta = spec.delta;
  m.transition_estimator = [gpe, theta, reps, delta](int, VectorRef x, VectorRef x_next, RandomStream& rng) {
    if (reps == 1) return gpe_transition_estimate(*gpe, theta, x, x_next, delta, rng);
    DensityDraw total;
    for (int r = 0; r < reps; ++r) {
      const DensityDraw d = gpe_transition_estimate(*gpe, theta, x, x_next, delta, rng);
      total.value += d.value;
      total.aux_events += d.aux_events;
    }
    total.value /= reps;
    return total;
  };
  m.transition_estimator_is_positive = true;
  m.grad_log_transition_estimator = [gpe, theta, delta](int, VectorRef x, VectorRef x_next, RandomStream& rng) {
    return gpe_grad_log_transition(*gpe, theta, x, x_next, delta, rng);
  };
  return m;
}

ModelFamily sine_family(const SineSpec& base) {
  base.validate();
  return [base](VectorRef theta) {
    if (theta.size() != 1) throw Error(ErrorCode::DimensionMismatch, "sine family expects a scalar theta");
    SineSpec s = base;
    s.theta = theta[0];
    return sine_model(s);
  };
}

ArBoundFn sine_ar_bound(const SineSpec& spec) {
  auto gpe = std::make_shared<const GpeConfig>(sine_gpe_config(spec.zero_drift));
  const Vector theta = scalar(spec.theta);
  const double delta = spec.delta;
  return [gpe, theta, delta](int, const ParticleCloud& cloud_k, VectorRef x_next) {
    double bound = 0.0;
    for (int l = 0; l < cloud_k.size(); ++l) {
      bound = std::max(bound, gpe_envelope(*gpe, theta, cloud_k.particles.col(l), x_next, delta));
    }
    return bound;
  };
}

SimulatedData simulate_sine(const SineSpec& spec, int n, std::uint64_t seed, bool fine_euler) {
  spec.validate();
  if (n < 0) throw Error(ErrorCode::InvalidArgument, "negative horizon");
  const GpeConfig gpe = sine_gpe_config(spec.zero_drift);
  const Vector theta = scalar(spec.theta);
  RandomStream rng = RngFactory(seed).stream({stream_tag::kSimulate});
  const double obs_sd = std::sqrt(spec.obs_variance);
  const int substeps = static_cast<int>(std::lround(spec.delta / kEulerStep));
  const double h = spec.delta / substeps;
  const double sqrt_h = std::sqrt(h);

  SimulatedData data;
  Vector x = scalar(spec.x0);
  for (int k = 0; k <= n; ++k) {
    if (k > 0) {
      if (fine_euler) {
        double v = x[0];
        for (int s = 0; s < substeps; ++s) {
          const double drift = spec.zero_drift ? 0.0 : std::sin(v - spec.theta);
          v += h * drift + sqrt_h * rng.normal();
        }
        x[0] = v;
      } else {
        x = exact_algorithm_step(gpe, theta, x, spec.delta, rng);
      }
    }
    data.times.push_back(k * spec.delta);
    data.states.push_back(x);
    data.observations.push_back(scalar(x[0] + obs_sd * rng.normal()));
  }
  return data;
}

}  // namespace pmsmc
