#include "pmsmc/rml.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <string>

namespace pmsmc {

namespace {

constexpr double kMaxScoreNorm = 1e3;

}  // namespace

double StepSizeSchedule::gamma(long k) const {
  if (k <= burn_in) return gamma0;
  return gamma0 / std::pow(static_cast<double>(k - burn_in), kappa);
}

void StepSizeSchedule::validate() const {
  if (!(gamma0 >= 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma0 must be nonnegative");
  if (burn_in < 0) throw Error(ErrorCode::InvalidArgument, "burn_in must be nonnegative");
  if (!(kappa > 0.5 - 1e-12) || !(kappa <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "kappa must lie in [0.5, 1]");
  }
}

AdditiveFunctional score_functional(const SsmDefinition& model, const Vector& y_source) {
  if (!model.supports_score()) {
    throw Error(ErrorCode::InvalidArgument, "model lacks obs_density_grad or grad_log_transition_estimator");
  }
  AdditiveFunctional f;
  f.out_dim = model.param_dim;
  f.add_increment = [model, y_source](int k, VectorRef x, VectorRef x_next, RandomStream& rng, double scale,
                                      Eigen::Ref<Vector> out) {
    const double g = model.obs_density(k, x, y_source);
    if (!(g > 0.0)) throw Error(ErrorCode::ZeroLikelihood, "score of a zero-likelihood particle");
    out += scale * (model.grad_log_transition_estimator(k, x, x_next, rng) + model.obs_density_grad(k, x, y_source) / g);
  };
  return f;
}

Vector score_increment(const SsmDefinition& model, const ParticleCloud& predictive, VectorRef y) {
  const int n = predictive.size();
  const int q = model.param_dim;
  if (predictive.backward_stats.rows() != q) {
    throw Error(ErrorCode::DimensionMismatch, "tangent statistics must have the parameter dimension");
  }
  const Vector v = normalize_weights(predictive.weights);
  double eta_g = 0.0;
  Vector eta_grad_g = Vector::Zero(q);
  Vector eta_tau = Vector::Zero(q);
  Vector eta_tau_g = Vector::Zero(q);
  for (int i = 0; i < n; ++i) {
    const auto x = predictive.particles.col(i);
    const double g = model.obs_density(predictive.step, x, y);
    eta_g += v[i] * g;
    eta_grad_g += v[i] * model.obs_density_grad(predictive.step, x, y);
    eta_tau += v[i] * predictive.backward_stats.col(i);
    eta_tau_g += (v[i] * g) * predictive.backward_stats.col(i);
  }
  if (!(eta_g > 0.0)) throw Error(ErrorCode::ZeroLikelihood, "predictive likelihood estimate is zero");
  return (eta_grad_g + eta_tau_g - eta_tau * eta_g) / eta_g;
}

RmlState rml_init(Vector theta0, const SmootherConfig& cfg, std::uint64_t seed) {
  if (!theta0.allFinite()) throw Error(ErrorCode::InvalidArgument, "initial parameter is not finite");
  if (cfg.n_particles < 1) throw Error(ErrorCode::InvalidArgument, "need at least one particle");
  RmlState state;
  state.polyak_sum = Vector::Zero(theta0.size());
  state.theta = std::move(theta0);
  state.rng = RngFactory(seed);
  return state;
}

RmlLogRow rml_step(const ModelFamily& family, RmlState& state, VectorRef y, const StepSizeSchedule& schedule,
                   const SmootherConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const SsmDefinition model = family(state.theta);
  if (model.param_dim != state.theta.size()) {
    throw Error(ErrorCode::DimensionMismatch, "model parameter dimension differs from theta");
  }

  if (state.k == 0) {
    state.cloud = init_filter(model, cfg, state.rng, model.param_dim);
  } else {
    ParticleCloud next = propagate_predictive(model, state.cloud, y, cfg, state.rng);
    update_backward_statistics(model, state.cloud, next, score_functional(model, state.last_observation), cfg,
                               state.rng);
    state.cloud = std::move(next);
  }
  const Vector score = score_increment(model, state.cloud, y);
  const double norm = score.norm();
  if (!std::isfinite(norm) || norm > kMaxScoreNorm) {
    throw Error(ErrorCode::NonFiniteGradient,
                "score increment norm " + std::to_string(norm) + " at step " + std::to_string(state.k + 1));
  }

  ++state.k;
  const double gamma = schedule.gamma(state.k);
  state.theta += gamma * score;
  apply_observation(model, state.cloud, y);
  state.last_observation = y;
  if (state.k > schedule.burn_in) {
    state.polyak_sum += state.theta;
    ++state.polyak_count;
  }

  RmlLogRow row;
  row.k = state.k;
  row.theta = state.theta;
  row.polyak = polyak_average(state);
  row.score = score;
  row.gamma = gamma;
  row.score_norm = norm;
  row.wall_time_ns =
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

Vector polyak_average(const RmlState& state) {
  if (state.polyak_count == 0) return state.theta;
  return state.polyak_sum / static_cast<double>(state.polyak_count);
}

Vector polyak_average(const std::vector<RmlLogRow>& log, int burn_in) {
  if (log.empty()) throw Error(ErrorCode::InvalidArgument, "empty iterate log");
  Vector sum = Vector::Zero(log.front().theta.size());
  long count = 0;
  for (const RmlLogRow& row : log) {
    if (row.k > burn_in) {
      sum += row.theta;
      ++count;
    }
  }
  if (count == 0) return log.back().theta;
  return sum / static_cast<double>(count);
}

RmlResult run_rml(const ModelFamily& family, const std::vector<Vector>& observations, Vector theta0,
                  const StepSizeSchedule& schedule, const SmootherConfig& cfg, std::uint64_t seed) {
  schedule.validate();
  RmlState state = rml_init(std::move(theta0), cfg, seed);
  RmlResult result;
  result.log.reserve(observations.size());
  for (const Vector& y : observations) result.log.push_back(rml_step(family, state, y, schedule, cfg));
  result.theta = state.theta;
  result.polyak = polyak_average(state);
  return result;
}

void write_rml_log_csv(std::ostream& out, const std::vector<RmlLogRow>& log, bool header) {
  const Eigen::Index q = log.empty() ? 0 : log.front().theta.size();
  if (header) {
    out << 'k';
    for (Eigen::Index j = 0; j < q; ++j) out << ",theta_" << j + 1;
    for (Eigen::Index j = 0; j < q; ++j) out << ",polyak_" << j + 1;
    out << ",gamma,score_norm,wall_time_ns\n";
  }
  const auto old_precision = out.precision(17);
  for (const RmlLogRow& row : log) {
    out << row.k;
    for (Eigen::Index j = 0; j < q; ++j) out << ',' << row.theta[j];
    for (Eigen::Index j = 0; j < q; ++j) out << ',' << row.polyak[j];
    out << ',' << row.gamma << ',' << row.score_norm << ',' << row.wall_time_ns << '\n';
  }
  out.precision(old_precision);
}

}  // namespace pmsmc
