#include "pmsmc/smoother.hpp"
#include "pmsmc/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>

namespace pmsmc {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t elapsed_ns(Clock::time_point since) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - since).count();
}

const DensityDraw& checked_draw(const DensityDraw& draw, bool positive_flagged) {
  if (!std::isfinite(draw.value) || std::isnan(draw.log_scale) || draw.log_scale == INFINITY) {
    throw Error(ErrorCode::NonFiniteWeight, "transition estimator returned a non-finite value");
  }
  if (positive_flagged && draw.value < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "positive-flagged transition estimator returned a negative value");
  }
  return draw;
}

// Running sum of estimator draws, value * exp(log_scale), kept relative to the
// largest scale seen so far. With log_scale = 0 it is the plain sum.
struct ScaledSum {
  double value = 0.0;
  double log_scale = -INFINITY;

  void add(const DensityDraw& d) {
    if (d.value == 0.0 || d.log_scale == -INFINITY) return;
    if (log_scale == -INFINITY) {
      value = d.value;
      log_scale = d.log_scale;
    } else if (d.log_scale > log_scale) {
      value = value * std::exp(log_scale - d.log_scale) + d.value;
      log_scale = d.log_scale;
    } else if (d.log_scale == log_scale) {
      value += d.value;
    } else {
      value += d.value * std::exp(d.log_scale - log_scale);
    }
  }
  // value * exp(log_scale - reference)
  double relative_to(double reference) const {
    if (value == 0.0) return 0.0;
    return log_scale == reference ? value : value * std::exp(log_scale - reference);
  }
};

}  // namespace

std::string to_string(SmootherMethod method) {
  switch (method) {
    case SmootherMethod::BackwardIS: return "BackwardIS";
    case SmootherMethod::BackwardAR: return "BackwardAR";
    case SmootherMethod::PathSpace: return "PathSpace";
  }
  return "Unknown";
}

SmootherMethod parse_smoother_method(const std::string& name) {
  if (name == "BackwardIS" || name == "is" || name == "IS") return SmootherMethod::BackwardIS;
  if (name == "BackwardAR" || name == "ar" || name == "AR") return SmootherMethod::BackwardAR;
  if (name == "PathSpace" || name == "path" || name == "PMS") return SmootherMethod::PathSpace;
  throw Error(ErrorCode::ConfigError, "unknown smoother method '" + name + "'");
}

void SmootherConfig::validate(const SsmDefinition& model) const {
  if (n_particles < 1) throw Error(ErrorCode::InvalidArgument, "need at least one particle");
  if (n_backward < 1) throw Error(ErrorCode::InvalidArgument, "need at least one backward sample");
  if (wald_max_rounds < 1) throw Error(ErrorCode::InvalidArgument, "wald_max_rounds must be positive");
  if (method == SmootherMethod::BackwardAR) {
    if (!ar_bound) throw Error(ErrorCode::InvalidArgument, "BackwardAR requires an ar_bound function");
    if (!model.transition_estimator_is_positive) {
      throw Error(ErrorCode::InvalidArgument, "BackwardAR requires a positive transition estimator");
    }
  }
}

int default_backward_count(int n_particles) {
  return static_cast<int>(std::ceil(std::pow(static_cast<double>(n_particles), 0.6) - 1e-9));
}

ParticleCloud init_filter(const SsmDefinition& model, const SmootherConfig& cfg, const RngFactory& rng,
                          int stats_dim) {
  const int n = cfg.n_particles;
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "need at least one particle");
  ParticleCloud cloud;
  cloud.step = 0;
  cloud.particles.resize(model.state_dim, n);
  cloud.weights.resize(n);
  cloud.backward_stats = Matrix::Zero(stats_dim, n);
  cloud.ancestors.assign(static_cast<std::size_t>(n), 0);
  parallel_for(n, cfg.threads, [&](int i) {
    RandomStream stream = rng.stream({stream_tag::kInit, static_cast<std::uint64_t>(i)});
    cloud.particles.col(i) = model.initial_sampler(stream);
    const double w = model.initial_density_ratio(cloud.particles.col(i));
    if (!std::isfinite(w) || w < 0.0) throw Error(ErrorCode::NonFiniteWeight, "invalid initial weight");
    cloud.weights[i] = w;
    cloud.ancestors[static_cast<std::size_t>(i)] = i;
  });
  if (!(cloud.weights.sum() > 0.0)) throw Error(ErrorCode::AllZeroWeights, "every initial weight is zero");
  return cloud;
}

void apply_observation(const SsmDefinition& model, ParticleCloud& cloud, VectorRef y) {
  if (y.size() != model.obs_dim) throw Error(ErrorCode::DimensionMismatch, "observation dimension");
  for (int i = 0; i < cloud.size(); ++i) {
    const double g = model.obs_density(cloud.step, cloud.particles.col(i), y);
    if (!std::isfinite(g) || g < 0.0) throw Error(ErrorCode::NonFiniteWeight, "invalid observation density");
    cloud.weights[i] *= g;
  }
  if (!(cloud.weights.sum() > 0.0)) {
    throw Error(ErrorCode::AllZeroWeights, "every weight vanished at step " + std::to_string(cloud.step));
  }
}

ParticleCloud propagate_predictive(const SsmDefinition& model, const ParticleCloud& cloud_k,
                                   VectorRef y_next, const SmootherConfig& cfg, const RngFactory& rng,
                                   PropagationStats* stats) {
  const int n = cfg.n_particles;
  const int k = cloud_k.step;
  const auto step_tag = static_cast<std::uint64_t>(k + 1);
  const CategoricalSampler sampler(cloud_k.weights);

  ParticleCloud next;
  next.step = k + 1;
  next.particles.resize(model.state_dim, n);
  next.weights = Vector::Zero(n);
  next.backward_stats = Matrix::Zero(cloud_k.backward_stats.rows(), n);
  next.ancestors.assign(static_cast<std::size_t>(n), 0);
  Vector log_proposal(n);
  std::vector<ScaledSum> sums(static_cast<std::size_t>(n));

  const bool positive = model.transition_estimator_is_positive;
  std::vector<std::optional<RandomStream>> streams;
  if (!positive) streams.resize(static_cast<std::size_t>(n));

  // Selection, mutation and (for positive estimators) the single weighting round.
  parallel_for(n, cfg.threads, [&](int i) {
    RandomStream stream = rng.stream({stream_tag::kPropagate, step_tag, static_cast<std::uint64_t>(i)});
    const int ancestor = sampler.sample(stream);
    next.ancestors[static_cast<std::size_t>(i)] = ancestor;
    const auto parent = cloud_k.particles.col(ancestor);
    next.particles.col(i) = model.proposal_sampler(k, parent, y_next, stream);
    const double p = model.proposal_density(k, parent, next.particles.col(i), y_next);
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw Error(ErrorCode::DomainError, "proposal density is not positive where it sampled");
    }
    log_proposal[i] = std::log(p);
    if (positive) {
      sums[static_cast<std::size_t>(i)].add(
          checked_draw(model.transition_estimator(k, parent, next.particles.col(i), stream), true));
    } else {
      streams[static_cast<std::size_t>(i)].emplace(std::move(stream));
    }
  });

  int rounds = 1;
  if (!positive) {
    // Every weight is re-augmented each round until all are positive.
    for (rounds = 1;; ++rounds) {
      parallel_for(n, cfg.threads, [&](int i) {
        const auto parent = cloud_k.particles.col(next.ancestors[static_cast<std::size_t>(i)]);
        RandomStream& stream = *streams[static_cast<std::size_t>(i)];
        sums[static_cast<std::size_t>(i)].add(
            checked_draw(model.transition_estimator(k, parent, next.particles.col(i), stream), false));
      });
      bool all_positive = true;
      for (const ScaledSum& sum : sums) all_positive = all_positive && sum.value > 0.0;
      if (all_positive) break;
      if (rounds >= cfg.wald_max_rounds) {
        throw Error(ErrorCode::WaldBudgetExceeded,
                    "filter weights still nonpositive after " + std::to_string(rounds) + " rounds at step " +
                        std::to_string(k + 1));
      }
    }
  }
  // q / p evaluated in log space: both factors may underflow separately.
  for (int i = 0; i < n; ++i) next.weights[i] = sums[static_cast<std::size_t>(i)].relative_to(log_proposal[i]);
  if (!next.weights.allFinite()) throw Error(ErrorCode::NonFiniteWeight, "propagated weight overflowed");
  if (stats) {
    stats->rounds = rounds;
    stats->estimator_calls = static_cast<long>(rounds) * n;
  }
  return next;
}

ParticleCloud propagate_wald(const SsmDefinition& model, const ParticleCloud& cloud_k, VectorRef y_next,
                             const SmootherConfig& cfg, const RngFactory& rng, PropagationStats* stats) {
  ParticleCloud next = propagate_predictive(model, cloud_k, y_next, cfg, rng, stats);
  apply_observation(model, next, y_next);
  return next;
}

BackwardSample backward_weights_wald(const SsmDefinition& model, const ParticleCloud& cloud_k,
                                     VectorRef x_next, const SmootherConfig& cfg,
                                     const CategoricalSampler& ancestors, RandomStream& rng) {
  const int k = cloud_k.step;
  const bool positive = model.transition_estimator_is_positive;
  BackwardSample sample;
  sample.draws.resize(static_cast<std::size_t>(cfg.n_backward));
  for (BackwardDraw& draw : sample.draws) draw.index = ancestors.sample(rng);
  std::vector<ScaledSum> sums(sample.draws.size());

  for (sample.rounds = 1;; ++sample.rounds) {
    bool all_positive = true;
    for (std::size_t j = 0; j < sample.draws.size(); ++j) {
      sums[j].add(checked_draw(
          model.transition_estimator(k, cloud_k.particles.col(sample.draws[j].index), x_next, rng), positive));
      all_positive = all_positive && sums[j].value > 0.0;
    }
    sample.estimator_calls += cfg.n_backward;
    if (positive || all_positive) break;
    if (sample.rounds >= cfg.wald_max_rounds) {
      throw Error(ErrorCode::WaldBudgetExceeded,
                  "backward weights still nonpositive after " + std::to_string(sample.rounds) + " rounds");
    }
  }
  // Weights share the factor exp(-largest scale); the IS update is invariant to it.
  double reference = -INFINITY;
  for (const ScaledSum& sum : sums) {
    if (sum.value != 0.0) reference = std::max(reference, sum.log_scale);
  }
  if (reference == -INFINITY) reference = 0.0;
  for (std::size_t j = 0; j < sums.size(); ++j) sample.draws[j].weight = sums[j].relative_to(reference);
  return sample;
}

BackwardSample backward_weights_wald(const SsmDefinition& model, const ParticleCloud& cloud_k,
                                     VectorRef x_next, const SmootherConfig& cfg, RandomStream& rng) {
  const CategoricalSampler sampler(cloud_k.weights);
  return backward_weights_wald(model, cloud_k, x_next, cfg, sampler, rng);
}

Vector update_backward_stats_is(const ParticleCloud& cloud_k, VectorRef x_next,
                                const std::vector<BackwardDraw>& draws,
                                const AdditiveFunctional& functional, RandomStream& rng) {
  if (cloud_k.backward_stats.rows() != functional.out_dim) {
    throw Error(ErrorCode::DimensionMismatch, "backward statistics do not match the functional dimension");
  }
  double total = 0.0;
  for (const BackwardDraw& draw : draws) total += draw.weight;
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw Error(ErrorCode::ZeroNormalizer, "backward weights sum to a nonpositive value");
  }
  Vector tau = Vector::Zero(functional.out_dim);
  for (const BackwardDraw& draw : draws) {
    // Ratio per draw (not a product with 1 / total) keeps common rescaling of
    // the weights exact whenever the weights themselves scale exactly.
    const double share = draw.weight / total;
    tau += share * cloud_k.backward_stats.col(draw.index);
    functional.add_increment(cloud_k.step, cloud_k.particles.col(draw.index), x_next, rng, share, tau);
  }
  return tau;
}

Vector update_backward_stats_ar(const SsmDefinition& model, const ParticleCloud& cloud_k,
                                VectorRef x_next, const SmootherConfig& cfg,
                                const CategoricalSampler& ancestors, RandomStream& rng,
                                const AdditiveFunctional& functional, long* proposals) {
  if (!cfg.ar_bound) throw Error(ErrorCode::InvalidArgument, "BackwardAR requires an ar_bound function");
  if (cloud_k.backward_stats.rows() != functional.out_dim) {
    throw Error(ErrorCode::DimensionMismatch, "backward statistics do not match the functional dimension");
  }
  const int k = cloud_k.step;
  const double bound = cfg.ar_bound(k, cloud_k, x_next);
  if (!(bound > 0.0) || !std::isfinite(bound)) {
    throw Error(ErrorCode::InvalidBound, "accept-reject bound must be positive and finite");
  }
  const double share = 1.0 / cfg.n_backward;
  Vector tau = Vector::Zero(functional.out_dim);
  long examined = 0;
  for (int j = 0; j < cfg.n_backward; ++j) {
    long tries = 0;
    for (;;) {
      if (++tries > cfg.ar_max_proposals) {
        throw Error(ErrorCode::RejectionBudgetExceeded, "backward accept-reject exhausted its budget");
      }
      const int candidate = ancestors.sample(rng);
      const auto source = cloud_k.particles.col(candidate);
      const double value = checked_draw(model.transition_estimator(k, source, x_next, rng), true).linear();
      const double accept = value / bound;
      if (accept > 1.0) {
        throw Error(ErrorCode::InvalidBound, "transition draw exceeds the accept-reject bound (ratio " +
                                                 std::to_string(accept) + ")");
      }
      if (rng.uniform() < accept) {
        tau += share * cloud_k.backward_stats.col(candidate);
        functional.add_increment(k, source, x_next, rng, share, tau);
        break;
      }
    }
    examined += tries;
  }
  if (proposals) *proposals = examined;
  return tau;
}

void update_backward_statistics(const SsmDefinition& model, const ParticleCloud& cloud_k,
                                ParticleCloud& cloud_next, const AdditiveFunctional& functional,
                                const SmootherConfig& cfg, const RngFactory& rng, BackwardUpdateStats* stats) {
  const int n = cloud_next.size();
  const auto step_tag = static_cast<std::uint64_t>(cloud_next.step);
  cloud_next.backward_stats.resize(functional.out_dim, n);
  std::vector<long> rounds(static_cast<std::size_t>(n), 0);
  std::vector<long> calls(static_cast<std::size_t>(n), 0);

  if (cfg.method == SmootherMethod::PathSpace) {
    parallel_for(n, cfg.threads, [&](int i) {
      RandomStream stream = rng.stream({stream_tag::kBackward, step_tag, static_cast<std::uint64_t>(i)});
      const int a = cloud_next.ancestors[static_cast<std::size_t>(i)];
      auto tau = cloud_next.backward_stats.col(i);
      tau = cloud_k.backward_stats.col(a);
      functional.add_increment(cloud_k.step, cloud_k.particles.col(a), cloud_next.particles.col(i), stream, 1.0,
                               tau);
    });
  } else {
    const CategoricalSampler sampler(cloud_k.weights);
    parallel_for(n, cfg.threads, [&](int i) {
      RandomStream stream = rng.stream({stream_tag::kBackward, step_tag, static_cast<std::uint64_t>(i)});
      const auto x_next = cloud_next.particles.col(i);
      const auto slot = static_cast<std::size_t>(i);
      if (cfg.method == SmootherMethod::BackwardIS) {
        const BackwardSample sample = backward_weights_wald(model, cloud_k, x_next, cfg, sampler, stream);
        cloud_next.backward_stats.col(i) = update_backward_stats_is(cloud_k, x_next, sample.draws, functional, stream);
        rounds[slot] = sample.rounds;
        calls[slot] = sample.estimator_calls;
      } else {
        long examined = 0;
        cloud_next.backward_stats.col(i) =
            update_backward_stats_ar(model, cloud_k, x_next, cfg, sampler, stream, functional, &examined);
        rounds[slot] = examined;
        calls[slot] = examined;
      }
    });
  }
  if (stats) {
    long total_rounds = 0;
    stats->estimator_calls = 0;
    for (int i = 0; i < n; ++i) {
      total_rounds += rounds[static_cast<std::size_t>(i)];
      stats->estimator_calls += calls[static_cast<std::size_t>(i)];
    }
    const double per = cfg.method == SmootherMethod::BackwardAR ? static_cast<double>(n) * cfg.n_backward : n;
    stats->mean_rounds = cfg.method == SmootherMethod::PathSpace ? 0.0 : static_cast<double>(total_rounds) / per;
  }
}

Vector smoothing_estimate(const ParticleCloud& cloud) {
  const Vector probs = normalize_weights(cloud.weights);
  return cloud.backward_stats * probs;
}

OnlineSmoother::OnlineSmoother(SsmDefinition model, AdditiveFunctional functional, SmootherConfig cfg,
                               std::uint64_t seed)
    : model_(std::move(model)), functional_(std::move(functional)), cfg_(std::move(cfg)), rng_(seed) {
  model_.validate();
  cfg_.validate(model_);
}

void OnlineSmoother::start(VectorRef y0) {
  const auto t0 = Clock::now();
  cloud_ = init_filter(model_, cfg_, rng_, functional_.out_dim);
  apply_observation(model_, cloud_, y0);
  trace_.clear();
  estimator_calls_ = 0;
  StepDiagnostics diag;
  diag.step = 0;
  diag.ess = ess(cloud_.weights);
  diag.wall_time_ns = elapsed_ns(t0);
  trace_.push_back(diag);
  started_ = true;
}

void OnlineSmoother::advance(VectorRef y) {
  if (!started_) throw Error(ErrorCode::InvalidArgument, "OnlineSmoother::advance before start");
  const auto t0 = Clock::now();
  PropagationStats prop;
  BackwardUpdateStats back;
  ParticleCloud next = propagate_predictive(model_, cloud_, y, cfg_, rng_, &prop);
  update_backward_statistics(model_, cloud_, next, functional_, cfg_, rng_, &back);
  apply_observation(model_, next, y);
  cloud_ = std::move(next);

  StepDiagnostics diag;
  diag.step = cloud_.step;
  diag.ess = ess(cloud_.weights);
  diag.wald_rounds_filter = prop.rounds;
  diag.mean_wald_rounds_backward = back.mean_rounds;
  diag.estimator_calls = prop.estimator_calls + back.estimator_calls;
  diag.wall_time_ns = elapsed_ns(t0);
  estimator_calls_ += diag.estimator_calls;
  trace_.push_back(diag);
}

SmoothingResult smooth_online(const SsmDefinition& model, const AdditiveFunctional& functional,
                              const std::vector<Vector>& observations, const SmootherConfig& cfg,
                              std::uint64_t seed) {
  if (observations.empty()) throw Error(ErrorCode::InvalidArgument, "need at least one observation");
  for (const Vector& y : observations) {
    if (y.size() != model.obs_dim) throw Error(ErrorCode::DimensionMismatch, "observation dimension");
  }
  const auto t0 = Clock::now();
  OnlineSmoother smoother(model, functional, cfg, seed);
  smoother.start(observations.front());
  for (std::size_t k = 1; k < observations.size(); ++k) smoother.advance(observations[k]);
  SmoothingResult result;
  result.estimate = smoother.estimate();
  result.trace = smoother.trace();
  result.estimator_calls = smoother.estimator_calls();
  result.wall_time_ns = elapsed_ns(t0);
  return result;
}

SmoothingResult path_space_smoother(const SsmDefinition& model, const AdditiveFunctional& functional,
                                    const std::vector<Vector>& observations, const SmootherConfig& cfg,
                                    std::uint64_t seed) {
  SmootherConfig path_cfg = cfg;
  path_cfg.method = SmootherMethod::PathSpace;
  return smooth_online(model, functional, observations, path_cfg, seed);
}

void write_trace_csv(std::ostream& out, const std::vector<StepDiagnostics>& trace) {
  out << "step,ess,wald_rounds_filter,mean_wald_rounds_backward,wall_time_ns\n";
  for (const StepDiagnostics& d : trace) {
    out << d.step << ',' << d.ess << ',' << d.wald_rounds_filter << ',' << d.mean_wald_rounds_backward << ','
        << d.wall_time_ns << '\n';
  }
}

}  // namespace pmsmc
