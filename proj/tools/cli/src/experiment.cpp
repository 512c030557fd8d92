#include "pmsmc/cli/experiment.hpp"
#include "pmsmc/models/linear_gaussian.hpp"
#include "pmsmc/models/lotka_volterra.hpp"
#include "pmsmc/models/rnn.hpp"
#include "pmsmc/models/sine.hpp"
#include "pmsmc/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#ifndef PMSMC_VERSION
#define PMSMC_VERSION "unknown"
#endif

namespace pmsmc::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kCsvPrecision = 17;

bool is_sine(const std::string& p) { return p == "sine" || p == "sine_benchmark"; }
bool is_rnn(const std::string& p) { return p.rfind("rnn", 0) == 0; }

Matrix matrix_from(const Json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) throw Error(ErrorCode::ConfigError, "empty matrix");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw Error(ErrorCode::ConfigError, "ragged matrix");
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
    }
  }
  return m;
}

Vector vector_from(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

SineSpec sine_spec(const Json& m) {
  SineSpec s;
  s.theta = m.at("theta").get<double>();
  s.obs_variance = m.at("obs_variance").get<double>();
  s.delta = m.at("delta").get<double>();
  s.x0 = m.at("x0").get<double>();
  s.prior_mean = m.at("prior_mean").get<double>();
  s.prior_variance = m.at("prior_variance").get<double>();
  s.gpe_replicates = m.at("gpe_replicates").get<int>();
  s.zero_drift = m.at("zero_drift").get<bool>();
  s.validate();
  return s;
}

RnnSsmSpec rnn_spec(const Json& m) {
  return synthesize_rnn_spec(m.at("state_dim").get<int>(), m.at("obs_dim").get<int>(),
                             m.at("weight_seed").get<std::uint64_t>(), m.at("variance").get<double>());
}

LotkaVolterraSpec lv_spec(const Json& m, int n_steps) {
  LotkaVolterraSpec s;
  s.a10 = m.at("a10").get<double>();
  s.a11 = m.at("a11").get<double>();
  s.a12 = m.at("a12").get<double>();
  s.a20 = m.at("a20").get<double>();
  s.a21 = m.at("a21").get<double>();
  s.a22 = m.at("a22").get<double>();
  s.Gamma = matrix_from(m.at("gamma"));
  s.c = vector_from(m.at("c"));
  s.Sigma = matrix_from(m.at("sigma"));
  s.x0 = vector_from(m.at("x0"));
  s.prior_log_sd = m.at("prior_log_sd").get<double>();
  s.t_end = m.at("t_end").get<double>();
  s.intensity = m.at("intensity").get<double>();
  s.n_obs = n_steps + 1;
  s.validate();
  return s;
}

LinearGaussianSpec lg_spec(const Json& m) {
  return LinearGaussianSpec::scalar(m.at("a").get<double>(), m.at("q").get<double>(), m.at("h").get<double>(),
                                    m.at("r").get<double>(), m.at("m0").get<double>(), m.at("p0").get<double>());
}

template <class F>
decltype(auto) with_model_errors(F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("model parameters: ") + e.what());
  }
}

Dataset from_simulated(SimulatedData s) {
  Dataset d;
  d.times = std::move(s.times);
  d.states = std::move(s.states);
  d.observations = std::move(s.observations);
  return d;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  ensure_dir(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << std::setprecision(kCsvPrecision);
  return out;
}

void close_checked(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  }
  return m;
}

// Linear interpolation between order statistics.
double quantile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

SmootherConfig smoother_config(const ExperimentConfig& cfg, const ModelBundle& bundle, SmootherMethod method,
                               int backward) {
  SmootherConfig s;
  s.n_particles = cfg.n_particles;
  s.n_backward = backward;
  s.method = method;
  s.wald_max_rounds = cfg.wald_max_rounds;
  s.ar_max_proposals = cfg.ar_max_proposals;
  s.ar_bound = bundle.ar_bound;
  if (method == SmootherMethod::BackwardAR && !s.ar_bound) {
    throw Error(ErrorCode::ConfigError, "BackwardAR needs an almost-sure bound, which preset '" + cfg.preset +
                                            "' does not provide");
  }
  return s;
}

// Score of the final observation given the terminal cloud, which closes the
// complete-data score after the last transition.
Vector terminal_score(const SsmDefinition& model, const ParticleCloud& cloud, VectorRef y) {
  const Vector v = normalize_weights(cloud.weights);
  Vector out = Vector::Zero(model.param_dim);
  for (int i = 0; i < cloud.size(); ++i) {
    const auto x = cloud.particles.col(i);
    const double g = model.obs_density(cloud.step, x, y);
    if (g > 0.0) out += v[i] * model.obs_density_grad(cloud.step, x, y) / g;
  }
  return out;
}

struct RunRecord {
  Vector estimate;
  double sq_error = std::nan("");
  std::int64_t wall_time_ns = 0;
  double mean_ess = 0.0;
  double mean_backward_rounds = 0.0;
  long estimator_calls = 0;
  std::vector<StepDiagnostics> trace;
};

RunRecord run_smoother(const ExperimentConfig& cfg, const ModelBundle& bundle, const AdditiveFunctional& functional,
                       const Dataset& data, const SmootherConfig& scfg, std::uint64_t seed,
                       const std::optional<Vector>& truth) {
  const auto t0 = std::chrono::steady_clock::now();
  OnlineSmoother smoother(bundle.model, functional, scfg, seed);
  smoother.start(data.observations.front());
  for (std::size_t k = 1; k < data.observations.size(); ++k) smoother.advance(data.observations[k]);
  RunRecord r;
  r.estimate = smoother.estimate();
  if (cfg.functional.kind == FunctionalKind::Score) {
    r.estimate += terminal_score(bundle.model, smoother.cloud(), data.observations.back());
  }
  r.wall_time_ns =
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count();
  r.trace = smoother.trace();
  r.estimator_calls = smoother.estimator_calls();
  for (const auto& d : r.trace) {
    r.mean_ess += d.ess;
    r.mean_backward_rounds += d.mean_wald_rounds_backward;
  }
  r.mean_ess /= static_cast<double>(r.trace.size());
  if (r.trace.size() > 1) r.mean_backward_rounds /= static_cast<double>(r.trace.size() - 1);
  if (truth) r.sq_error = (r.estimate - *truth).squaredNorm() / static_cast<double>(truth->size());
  return r;
}

}  // namespace

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  const int d = data.has_states() ? static_cast<int>(data.states.front().size()) : 0;
  const int m = data.observations.empty() ? 0 : static_cast<int>(data.observations.front().size());
  const auto old = out.precision(kCsvPrecision);
  out << 't';
  for (int i = 1; i <= d; ++i) out << ",x_" << i;
  for (int i = 1; i <= m; ++i) out << ",y_" << i;
  out << '\n';
  for (std::size_t k = 0; k < data.observations.size(); ++k) {
    out << data.times[k];
    for (int i = 0; i < d; ++i) out << ',' << data.states[k][i];
    for (int i = 0; i < m; ++i) out << ',' << data.observations[k][i];
    out << '\n';
  }
  out.precision(old);
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::IoError, "dataset is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.empty() || header.front() != "t") throw Error(ErrorCode::IoError, "dataset header must start with t");
  int d = 0, m = 0;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const std::string expect_x = "x_" + std::to_string(d + 1);
    const std::string expect_y = "y_" + std::to_string(m + 1);
    if (m == 0 && header[c] == expect_x) {
      ++d;
    } else if (header[c] == expect_y) {
      ++m;
    } else {
      throw Error(ErrorCode::IoError, "unexpected dataset column '" + header[c] + "'");
    }
  }
  if (m == 0) throw Error(ErrorCode::IoError, "dataset has no observation columns");
  Dataset data;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw Error(ErrorCode::IoError, "row " + std::to_string(row) + ": bad number '" + cell + "'");
      }
    }
    if (values.size() != header.size()) {
      throw Error(ErrorCode::IoError, "row " + std::to_string(row) + " has " + std::to_string(values.size()) +
                                          " fields, expected " + std::to_string(header.size()));
    }
    data.times.push_back(values[0]);
    if (d > 0) data.states.push_back(Eigen::Map<const Vector>(values.data() + 1, d));
    data.observations.push_back(Eigen::Map<const Vector>(values.data() + 1 + d, m));
  }
  if (data.observations.empty()) throw Error(ErrorCode::IoError, "dataset has no rows");
  return data;
}

Dataset read_dataset_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open dataset " + path.string());
  return read_dataset_csv(in);
}

ModelBundle build_model(const ExperimentConfig& cfg, const Dataset& data) {
  return with_model_errors([&] {
    ModelBundle b;
    const std::string& p = cfg.preset;
    if (is_sine(p)) {
      const SineSpec s = sine_spec(cfg.model);
      b.model = sine_model(s);
      b.ar_bound = sine_ar_bound(s);
      b.family = sine_family(s);
      b.theta = Vector::Constant(1, s.theta);
    } else if (is_rnn(p)) {
      const RnnSsmSpec s = rnn_spec(cfg.model);
      b.model = rnn_model(s, std::make_shared<const std::vector<Vector>>(data.observations));
    } else if (p == "lv") {
      b.model = lotka_volterra_model(lv_spec(cfg.model, data.n_steps()));
    } else if (p == "lg") {
      const LinearGaussianSpec s = lg_spec(cfg.model);
      b.model = linear_gaussian_model(s);
      b.ar_bound = linear_gaussian_ar_bound(s);
      b.family = linear_gaussian_family(s);
      b.theta = Vector(2);
      b.theta << s.A(0, 0), s.H(0, 0);
    } else {
      throw Error(ErrorCode::ConfigError, "unknown preset '" + p + "'");
    }
    b.state_dim = b.model.state_dim;
    b.obs_dim = b.model.obs_dim;
    if (b.family) b.model = b.family(b.theta);
    for (const Vector& y : data.observations) {
      if (y.size() != b.obs_dim) {
        throw Error(ErrorCode::DimensionMismatch, "dataset observations have dimension " + std::to_string(y.size()) +
                                                      ", preset expects " + std::to_string(b.obs_dim));
      }
    }
    if (data.has_states() && data.states.front().size() != b.state_dim) {
      throw Error(ErrorCode::DimensionMismatch, "dataset states do not match the preset state dimension");
    }
    return b;
  });
}

Dataset simulate_preset(const ExperimentConfig& cfg, std::uint64_t seed) {
  return with_model_errors([&] {
    const std::string& p = cfg.preset;
    if (is_sine(p)) return from_simulated(simulate_sine(sine_spec(cfg.model), cfg.n_steps, seed));
    if (is_rnn(p)) return from_simulated(simulate_rnn_ssm(rnn_spec(cfg.model), cfg.n_steps, seed));
    if (p == "lv") return from_simulated(simulate_lv(lv_spec(cfg.model, cfg.n_steps), seed));
    if (p == "lg") return from_simulated(simulate_linear_gaussian(lg_spec(cfg.model), cfg.n_steps, seed));
    throw Error(ErrorCode::ConfigError, "unknown preset '" + p + "'");
  });
}

AdditiveFunctional build_functional(const ExperimentConfig& cfg, const ModelBundle& bundle, const Dataset& data) {
  const int n = data.n_steps();
  switch (cfg.functional.kind) {
    case FunctionalKind::StateAt:
      for (int k : cfg.functional.steps) {
        if (k > n) throw Error(ErrorCode::DimensionMismatch, "functional step beyond the dataset horizon");
      }
      return states_at(bundle.state_dim, cfg.functional.steps);
    case FunctionalKind::CumulativeState:
      return cumulative_state(bundle.state_dim, n, 1.0 / (n + 1));
    case FunctionalKind::Score: {
      if (!bundle.family) throw Error(ErrorCode::ConfigError, "preset '" + cfg.preset + "' has no score family");
      auto obs = std::make_shared<const std::vector<Vector>>(data.observations);
      AdditiveFunctional f;
      f.out_dim = bundle.model.param_dim;
      f.add_increment = [model = bundle.model, obs](int k, VectorRef x, VectorRef x_next, RandomStream& rng,
                                                    double scale, Eigen::Ref<Vector> out) {
        const Vector& y = (*obs)[static_cast<std::size_t>(k)];
        const double g = model.obs_density(k, x, y);
        if (!(g > 0.0)) throw Error(ErrorCode::ZeroLikelihood, "score of a zero-likelihood particle");
        out += scale * (model.grad_log_transition_estimator(k, x, x_next, rng) + model.obs_density_grad(k, x, y) / g);
      };
      return f;
    }
  }
  throw Error(ErrorCode::ConfigError, "unknown functional");
}

std::optional<Vector> functional_truth(const ExperimentConfig& cfg, const Dataset& data) {
  if (!data.has_states()) return std::nullopt;
  const auto d = data.states.front().size();
  switch (cfg.functional.kind) {
    case FunctionalKind::StateAt: {
      Vector t(d * static_cast<Eigen::Index>(cfg.functional.steps.size()));
      for (std::size_t b = 0; b < cfg.functional.steps.size(); ++b) {
        t.segment(static_cast<Eigen::Index>(b) * d, d) =
            data.states[static_cast<std::size_t>(cfg.functional.steps[b])];
      }
      return t;
    }
    case FunctionalKind::CumulativeState: {
      Vector t = Vector::Zero(d);
      for (const Vector& x : data.states) t += x;
      return Vector(t / static_cast<double>(data.states.size()));
    }
    case FunctionalKind::Score:
      return std::nullopt;
  }
  return std::nullopt;
}

std::optional<Vector> exact_posterior_mean(const ExperimentConfig& cfg, const Dataset& data) {
  if (cfg.preset != "lg") return std::nullopt;
  const KalmanResult kf = kalman_rts(lg_spec(cfg.model), data.observations);
  const auto d = kf.smoother_means.front().size();
  switch (cfg.functional.kind) {
    case FunctionalKind::StateAt: {
      Vector t(d * static_cast<Eigen::Index>(cfg.functional.steps.size()));
      for (std::size_t b = 0; b < cfg.functional.steps.size(); ++b) {
        t.segment(static_cast<Eigen::Index>(b) * d, d) =
            kf.smoother_means[static_cast<std::size_t>(cfg.functional.steps[b])];
      }
      return t;
    }
    case FunctionalKind::CumulativeState: {
      Vector t = Vector::Zero(d);
      for (const Vector& m : kf.smoother_means) t += m;
      return Vector(t / static_cast<double>(kf.smoother_means.size()));
    }
    case FunctionalKind::Score:
      return std::nullopt;
  }
  return std::nullopt;
}

void write_manifest(const fs::path& file, const std::string& command, const ExperimentConfig& cfg) {
  const Json config = cfg.to_json();
  std::ostringstream hash;
  hash << std::hex << std::setw(16) << std::setfill('0') << config_hash(config);
  const Json manifest = {{"file", file.filename().string()},
                         {"command", command},
                         {"version", PMSMC_VERSION},
                         {"seed", cfg.seed},
                         {"preset", cfg.preset},
                         {"config_hash", hash.str()},
                         {"config", config}};
  fs::path path = file;
  path += ".manifest.json";
  std::ofstream out = open_out(path);
  out << manifest.dump(2) << '\n';
  close_checked(out, path);
}

fs::path cmd_simulate(const ExperimentConfig& cfg) {
  const Dataset data = simulate_preset(cfg, cfg.seed);
  const fs::path path = fs::path(cfg.out_dir) / "data.csv";
  std::ofstream out = open_out(path);
  write_dataset_csv(out, data);
  close_checked(out, path);
  write_manifest(path, "simulate", cfg);
  return path;
}

fs::path cmd_smooth(const ExperimentConfig& cfg, const Dataset& data) {
  const ModelBundle bundle = build_model(cfg, data);
  const AdditiveFunctional functional = build_functional(cfg, bundle, data);
  const std::optional<Vector> truth = functional_truth(cfg, data);
  const int p = functional.out_dim;

  struct Group {
    SmootherMethod method;
    int backward;
    std::vector<RunRecord> runs;
  };
  std::vector<Group> groups;
  for (SmootherMethod m : cfg.methods) {
    if (m == SmootherMethod::PathSpace) {
      groups.push_back({m, 0, {}});
    } else {
      for (int k : cfg.backward) groups.push_back({m, k, {}});
    }
  }
  for (Group& g : groups) {
    const SmootherConfig scfg = smoother_config(cfg, bundle, g.method, std::max(1, g.backward));
    g.runs.resize(static_cast<std::size_t>(cfg.replicates));
    parallel_for(cfg.replicates, cfg.threads, [&](int r) {
      g.runs[static_cast<std::size_t>(r)] =
          run_smoother(cfg, bundle, functional, data, scfg, cfg.replicate_seed(r), truth);
    });
  }

  const fs::path dir(cfg.out_dir);
  const fs::path path = dir / "results.csv";
  std::ofstream out = open_out(path);
  out << "method,n_particles,n_backward,replicate,seed";
  for (int j = 1; j <= p; ++j) out << ",estimate_" << j;
  out << ",sq_error,wall_time_ns,mean_ess,mean_backward_rounds,estimator_calls\n";
  const auto write_value = [&](double v) {
    if (std::isnan(v)) {
      out << ',';
    } else {
      out << ',' << v;
    }
  };
  for (const Group& g : groups) {
    for (int r = 0; r < cfg.replicates; ++r) {
      const RunRecord& run = g.runs[static_cast<std::size_t>(r)];
      out << to_string(g.method) << ',' << cfg.n_particles << ',' << g.backward << ',' << r << ','
          << cfg.replicate_seed(r);
      for (int j = 0; j < p; ++j) out << ',' << run.estimate[j];
      write_value(run.sq_error);
      out << ',' << run.wall_time_ns << ',' << run.mean_ess << ',' << run.mean_backward_rounds << ','
          << run.estimator_calls << '\n';
    }
    // Aggregate rows: mean, then standard error, of every numeric column.
    for (const char* label : {"mean", "se"}) {
      const bool mean_row = std::string(label) == "mean";
      const auto column = [&](auto get) {
        std::vector<double> v;
        for (const RunRecord& run : g.runs) v.push_back(get(run));
        const Moments m = moments(v);
        return mean_row ? m.mean : m.se;
      };
      out << to_string(g.method) << ',' << cfg.n_particles << ',' << g.backward << ',' << label << ',';
      for (int j = 0; j < p; ++j) out << ',' << column([j](const RunRecord& run) { return run.estimate[j]; });
      write_value(truth ? column([](const RunRecord& run) { return run.sq_error; }) : std::nan(""));
      out << ',' << column([](const RunRecord& run) { return static_cast<double>(run.wall_time_ns); }) << ','
          << column([](const RunRecord& run) { return run.mean_ess; }) << ','
          << column([](const RunRecord& run) { return run.mean_backward_rounds; }) << ','
          << column([](const RunRecord& run) { return static_cast<double>(run.estimator_calls); }) << '\n';
    }
  }
  close_checked(out, path);
  write_manifest(path, "smooth", cfg);

  // Per-group summary. Bias is against the exact posterior mean on the
  // linear-Gaussian preset and against the first BackwardAR group otherwise.
  std::optional<Vector> reference = exact_posterior_mean(cfg, data);
  if (!reference) {
    for (const Group& g : groups) {
      if (g.method != SmootherMethod::BackwardAR) continue;
      Vector mean = Vector::Zero(p);
      for (const RunRecord& run : g.runs) mean += run.estimate;
      reference = Vector(mean / static_cast<double>(g.runs.size()));
      break;
    }
  }
  const fs::path summary_path = dir / "summary.csv";
  std::ofstream sum = open_out(summary_path);
  sum << "method,n_particles,n_backward,replicates";
  for (int j = 1; j <= p; ++j) sum << ",mean_" << j << ",se_" << j << ",bias_" << j;
  sum << ",mse,mse_se,median_wall_ns,iqr_wall_ns\n";
  for (const Group& g : groups) {
    sum << to_string(g.method) << ',' << cfg.n_particles << ',' << g.backward << ',' << cfg.replicates;
    for (int j = 0; j < p; ++j) {
      std::vector<double> v;
      for (const RunRecord& run : g.runs) v.push_back(run.estimate[j]);
      const Moments m = moments(v);
      sum << ',' << m.mean << ',' << m.se << ',';
      if (reference) sum << m.mean - (*reference)[j];
    }
    std::vector<double> sq, wall;
    for (const RunRecord& run : g.runs) {
      sq.push_back(run.sq_error);
      wall.push_back(static_cast<double>(run.wall_time_ns));
    }
    if (truth) {
      const Moments m = moments(sq);
      sum << ',' << m.mean << ',' << m.se;
    } else {
      sum << ",,";
    }
    sum << ',' << quantile(wall, 0.5) << ',' << quantile(wall, 0.75) - quantile(wall, 0.25) << '\n';
  }
  close_checked(sum, summary_path);
  write_manifest(summary_path, "smooth", cfg);

  for (const Group& g : groups) {
    const fs::path trace_path =
        dir / ("trace_" + to_string(g.method) + "_K" + std::to_string(g.backward) + ".csv");
    std::ofstream tr = open_out(trace_path);
    write_trace_csv(tr, g.runs.front().trace);
    close_checked(tr, trace_path);
  }
  return path;
}

fs::path cmd_rml(const ExperimentConfig& cfg, const std::vector<Dataset>& datasets) {
  if (datasets.empty()) throw Error(ErrorCode::ConfigError, "rml needs at least one dataset");
  const ModelBundle bundle = build_model(cfg, datasets.front());
  if (!bundle.family) throw Error(ErrorCode::ConfigError, "preset '" + cfg.preset + "' has no parameter family");
  const SmootherMethod method = cfg.methods.front();
  if (method == SmootherMethod::BackwardAR && cfg.preset != "lg") {
    throw Error(ErrorCode::ConfigError, "BackwardAR in rml needs a parameter-free bound (lg preset only)");
  }
  const SmootherConfig scfg = smoother_config(cfg, bundle, method, cfg.backward.front());
  const int q = static_cast<int>(bundle.theta.size());

  std::vector<Vector> starts;
  for (const auto& s : cfg.rml.starts) {
    if (static_cast<int>(s.size()) != q) throw Error(ErrorCode::ConfigError, "rml start has the wrong dimension");
    starts.push_back(Eigen::Map<const Vector>(s.data(), q));
  }
  RandomStream start_rng = RngFactory(cfg.seed).stream({stream_tag::kReplicate, 0x73746172ULL});
  for (int s = 0; s < cfg.rml.random_starts; ++s) {
    Vector v(q);
    for (int j = 0; j < q; ++j) v[j] = start_rng.uniform(cfg.rml.start_low, cfg.rml.start_high);
    starts.push_back(v);
  }
  if (starts.empty()) starts.push_back(bundle.theta);
  const std::vector<double> kappas = cfg.rml.kappa_sweep.empty() ? std::vector<double>{cfg.rml.kappa}
                                                                 : cfg.rml.kappa_sweep;
  for (const Dataset& d : datasets) build_model(cfg, d);  // dimension checks

  struct Job {
    int dataset, start, kappa_index;
  };
  std::vector<Job> jobs;
  for (int d = 0; d < static_cast<int>(datasets.size()); ++d) {
    for (int s = 0; s < static_cast<int>(starts.size()); ++s) {
      for (int c = 0; c < static_cast<int>(kappas.size()); ++c) jobs.push_back({d, s, c});
    }
  }
  std::vector<RmlResult> results(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), cfg.threads, [&](int i) {
    const Job& job = jobs[static_cast<std::size_t>(i)];
    StepSizeSchedule schedule;
    schedule.gamma0 = cfg.rml.gamma0;
    schedule.burn_in = cfg.rml.burn_in;
    schedule.kappa = kappas[static_cast<std::size_t>(job.kappa_index)];
    const std::uint64_t seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(job.dataset),
                                                      static_cast<std::uint64_t>(job.start),
                                                      static_cast<std::uint64_t>(job.kappa_index)});
    results[static_cast<std::size_t>(i)] =
        run_rml(bundle.family, datasets[static_cast<std::size_t>(job.dataset)].observations,
                starts[static_cast<std::size_t>(job.start)], schedule, scfg, seed);
  });

  const fs::path dir(cfg.out_dir);
  const fs::path path = dir / "rml.csv";
  std::ofstream out = open_out(path);
  out << "dataset,start,kappa,k";
  for (int j = 1; j <= q; ++j) out << ",theta_" << j;
  for (int j = 1; j <= q; ++j) out << ",polyak_" << j;
  out << ",gamma,score_norm,wall_time_ns\n";
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& log = results[i].log;
    for (std::size_t r = 0; r < log.size(); ++r) {
      const RmlLogRow& row = log[r];
      if (row.k % cfg.rml.log_every != 0 && r + 1 != log.size()) continue;
      out << jobs[i].dataset << ',' << jobs[i].start << ',' << kappas[static_cast<std::size_t>(jobs[i].kappa_index)]
          << ',' << row.k;
      for (int j = 0; j < q; ++j) out << ',' << row.theta[j];
      for (int j = 0; j < q; ++j) out << ',' << row.polyak[j];
      out << ',' << row.gamma << ',' << row.score_norm << ',' << row.wall_time_ns << '\n';
    }
  }
  close_checked(out, path);
  write_manifest(path, "rml", cfg);

  const fs::path final_path = dir / "rml_final.csv";
  std::ofstream fin = open_out(final_path);
  fin << "dataset,start,kappa";
  for (int j = 1; j <= q; ++j) fin << ",theta0_" << j;
  for (int j = 1; j <= q; ++j) fin << ",theta_" << j;
  for (int j = 1; j <= q; ++j) fin << ",polyak_" << j;
  fin << '\n';
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    fin << jobs[i].dataset << ',' << jobs[i].start << ',' << kappas[static_cast<std::size_t>(jobs[i].kappa_index)];
    const Vector& s = starts[static_cast<std::size_t>(jobs[i].start)];
    for (int j = 0; j < q; ++j) fin << ',' << s[j];
    for (int j = 0; j < q; ++j) fin << ',' << results[i].theta[j];
    for (int j = 0; j < q; ++j) fin << ',' << results[i].polyak[j];
    fin << '\n';
  }
  close_checked(fin, final_path);
  write_manifest(final_path, "rml", cfg);
  return path;
}

int backward_for_bench(const std::string& schedule, int n_particles) {
  if (schedule == "n_over_10") return std::max(1, n_particles / 10);
  if (schedule == "pow0.5") return std::max(1, static_cast<int>(std::ceil(std::sqrt(n_particles) - 1e-9)));
  if (schedule == "pow0.6") return default_backward_count(n_particles);
  try {
    std::size_t used = 0;
    const int k = std::stoi(schedule, &used);
    if (used == schedule.size() && k >= 1) return k;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::ConfigError, "bench.is_backward must be n_over_10, pow0.5, pow0.6 or a positive integer");
}

fs::path cmd_bench(const ExperimentConfig& cfg) {
  if (!is_sine(cfg.preset)) throw Error(ErrorCode::ConfigError, "bench runs on the sine presets");
  const Dataset data = simulate_preset(cfg, cfg.seed);
  const ModelBundle bundle = build_model(cfg, data);
  const AdditiveFunctional functional = build_functional(cfg, bundle, data);

  const fs::path dir(cfg.out_dir);
  const fs::path path = dir / "bench.csv";
  const fs::path summary_path = dir / "bench_summary.csv";
  std::ofstream out = open_out(path);
  std::ofstream sum = open_out(summary_path);
  out << "method,n_particles,n_backward,replicate,wall_time_ns,estimate_1\n";
  sum << "method,n_particles,n_backward,replicates,median_wall_ns,q1_wall_ns,q3_wall_ns,iqr_wall_ns,mean_estimate_1,"
         "se_estimate_1\n";
  for (int n : cfg.bench.particles) {
    for (const std::string& name : cfg.bench.methods) {
      const SmootherMethod method = parse_smoother_method(name);
      const int k = method == SmootherMethod::BackwardAR ? cfg.bench.ar_backward
                                                         : backward_for_bench(cfg.bench.is_backward, n);
      ExperimentConfig run_cfg = cfg;
      run_cfg.n_particles = n;
      const SmootherConfig scfg = smoother_config(run_cfg, bundle, method, k);
      std::vector<double> wall, est;
      // Serial on purpose: wall times are the measurement.
      for (int r = 0; r < cfg.replicates; ++r) {
        const RunRecord run = run_smoother(run_cfg, bundle, functional, data, scfg, cfg.replicate_seed(r), {});
        wall.push_back(static_cast<double>(run.wall_time_ns));
        est.push_back(run.estimate[0]);
        out << name << ',' << n << ',' << k << ',' << r << ',' << run.wall_time_ns << ',' << run.estimate[0] << '\n';
      }
      const double q1 = quantile(wall, 0.25), q3 = quantile(wall, 0.75);
      const Moments m = moments(est);
      sum << name << ',' << n << ',' << k << ',' << cfg.replicates << ',' << quantile(wall, 0.5) << ',' << q1 << ','
          << q3 << ',' << q3 - q1 << ',' << m.mean << ',' << m.se << '\n';
    }
  }
  close_checked(out, path);
  close_checked(sum, summary_path);
  write_manifest(path, "bench", cfg);
  write_manifest(summary_path, "bench", cfg);
  return path;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::DimensionMismatch:
      return 2;
    case ErrorCode::IoError:
      return 4;
    default:
      return 3;
  }
}

}  // namespace pmsmc::cli
