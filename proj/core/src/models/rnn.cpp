#include "pmsmc/models/rnn.hpp"
#include "pmsmc/gaussian.hpp"

#include <cmath>

namespace pmsmc {

namespace {

constexpr int kPresetObsDim = 4;

Vector noise(const Vector& var_diag, RandomStream& rng) {
  return var_diag.array().sqrt().matrix().cwiseProduct(rng.normal_vector(var_diag.size()));
}

}  // namespace

void RnnSsmSpec::validate() const {
  const auto d = W2.rows();
  const auto m = W3.rows();
  if (d < 1 || m < 1 || W2.cols() != d || W1.rows() != d || W1.cols() != m || W3.cols() != d || b.size() != d ||
      c.size() != m || sigma_diag.size() != d || q_diag.size() != d || r_diag.size() != m) {
    throw Error(ErrorCode::DimensionMismatch, "RNN spec dimensions are inconsistent");
  }
  if (!(sigma_diag.array() > 0.0).all() || !(q_diag.array() > 0.0).all() || !(r_diag.array() > 0.0).all()) {
    throw Error(ErrorCode::InvalidArgument, "RNN covariance diagonals must be positive");
  }
}

RnnSsmSpec synthesize_rnn_spec(int state_dim, int obs_dim, std::uint64_t seed, double variance) {
  if (state_dim < 1 || obs_dim < 1) throw Error(ErrorCode::InvalidArgument, "RNN dimensions must be positive");
  RandomStream rng = RngFactory(seed).stream({0x524e4eULL, static_cast<std::uint64_t>(state_dim),
                                              static_cast<std::uint64_t>(obs_dim)});
  auto gaussian = [&rng](int rows, int cols, double scale) {
    Matrix w(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) w(i, j) = scale * rng.normal();
    return w;
  };
  const double fan_in = static_cast<double>(state_dim + obs_dim);
  RnnSsmSpec s;
  s.W1 = gaussian(state_dim, obs_dim, 1.0 / std::sqrt(fan_in));
  s.W2 = gaussian(state_dim, state_dim, 1.0 / std::sqrt(fan_in));
  s.W3 = gaussian(obs_dim, state_dim, 1.0 / std::sqrt(static_cast<double>(state_dim)));
  s.b = gaussian(state_dim, 1, 0.1);
  s.c = gaussian(obs_dim, 1, 0.1);
  s.sigma_diag = Vector::Constant(state_dim, variance);
  s.q_diag = Vector::Constant(state_dim, variance);
  s.r_diag = Vector::Constant(obs_dim, variance);
  return s;
}

RnnSsmSpec rnn_preset(int state_dim, std::uint64_t weight_seed) {
  return synthesize_rnn_spec(state_dim, kPresetObsDim, weight_seed);
}

SimulatedData simulate_rnn_ssm(const RnnSsmSpec& spec, int n, std::uint64_t seed) {
  spec.validate();
  if (n < 0) throw Error(ErrorCode::InvalidArgument, "negative horizon");
  RandomStream rng = RngFactory(seed).stream({stream_tag::kSimulate});
  SimulatedData data;
  Vector x = noise(spec.sigma_diag, rng);
  Vector y;
  for (int k = 0; k <= n; ++k) {
    if (k > 0) {
      const Vector pre = spec.W1 * y + spec.W2 * x + spec.b + noise(spec.q_diag, rng);
      x = pre.array().tanh().matrix();
    }
    y = spec.W3 * x + spec.c + noise(spec.r_diag, rng);
    data.times.push_back(k);
    data.states.push_back(x);
    data.observations.push_back(y);
  }
  return data;
}

double rnn_transition_density(const RnnSsmSpec& spec, VectorRef x, VectorRef y_prev, VectorRef x_next) {
  double log_density = 0.0;
  const Vector mean = spec.W1 * y_prev + spec.W2 * x + spec.b;
  for (Eigen::Index i = 0; i < x_next.size(); ++i) {
    const double v = x_next[i];
    if (!(std::abs(v) < 1.0)) throw Error(ErrorCode::DomainError, "RNN state coordinate reached +-1");
    log_density += normal_log_pdf(std::atanh(v), mean[i], spec.q_diag[i]) - std::log1p(-v * v);
  }
  return std::exp(log_density);
}

SsmDefinition rnn_model(const RnnSsmSpec& spec, std::shared_ptr<const std::vector<Vector>> observations) {
  spec.validate();
  if (!observations) throw Error(ErrorCode::InvalidArgument, "RNN model needs the observation sequence");
  auto s = std::make_shared<const RnnSsmSpec>(spec);
  auto y_at = [observations](int k) -> const Vector& {
    if (k < 0 || static_cast<std::size_t>(k) >= observations->size()) {
      throw Error(ErrorCode::InvalidArgument, "RNN transition out of step " + std::to_string(k) + " has no input");
    }
    return (*observations)[static_cast<std::size_t>(k)];
  };

  SsmDefinition m;
  m.state_dim = spec.state_dim();
  m.obs_dim = spec.obs_dim();
  m.param_dim = 1;
  m.initial_sampler = [s](RandomStream& rng) { return noise(s->sigma_diag, rng); };
  m.initial_density_ratio = [](VectorRef) { return 1.0; };
  m.proposal_sampler = [s, y_at](int k, VectorRef x, VectorRef, RandomStream& rng) -> Vector {
    const Vector pre = s->W1 * y_at(k) + s->W2 * x + s->b + noise(s->q_diag, rng);
    return pre.array().tanh().matrix();
  };
  m.proposal_density = [s, y_at](int k, VectorRef x, VectorRef x_next, VectorRef) {
    return rnn_transition_density(*s, x, y_at(k), x_next);
  };
  m.obs_density = [s](int, VectorRef x, VectorRef y) {
    const Vector resid = y - s->W3 * x - s->c;
    double lp = 0.0;
    for (Eigen::Index i = 0; i < resid.size(); ++i) lp += normal_log_pdf(resid[i], 0.0, s->r_diag[i]);
    return std::exp(lp);
  };
  m.transition_estimator = [s, y_at](int k, VectorRef x, VectorRef x_next, RandomStream&) {
    return DensityDraw{rnn_transition_density(*s, x, y_at(k), x_next), 0};
  };
  m.transition_estimator_is_positive = true;
  return m;
}

}  // namespace pmsmc
