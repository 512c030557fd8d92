#include "pmsmc/cli/config.hpp"
#include "pmsmc/random.hpp"

#include <fstream>
#include <set>

namespace pmsmc::cli {

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Json sine_model_defaults(int gpe_replicates) {
  return {{"theta", kPi / 4.0},      {"obs_variance", 1.0},   {"delta", 0.5},
          {"x0", 0.0},               {"prior_mean", 0.0},     {"prior_variance", 1.0},
          {"gpe_replicates", gpe_replicates}, {"zero_drift", false}};
}

Json run_defaults(int n_steps, int particles, std::vector<int> backward, std::vector<std::string> methods,
                  Json functional) {
  return {{"n_steps", n_steps},
          {"smoother", {{"particles", particles}, {"backward", backward}, {"methods", methods}}},
          {"functional", std::move(functional)}};
}

template <class T>
T take(const Json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const Json::exception& e) {
    config_error(std::string("bad value for '") + key + "': " + e.what());
  }
}

void reject_unknown(const Json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) config_error(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!known.count(key)) config_error("unknown key '" + key + "' in " + where);
  }
}

std::vector<int> backward_list(const Json& v) {
  if (v.is_number_integer()) return {v.get<int>()};
  if (v.is_array()) return v.get<std::vector<int>>();
  config_error("smoother.backward must be an integer or a list of integers");
}

FunctionalSpec parse_functional(const Json& f, int n_steps) {
  reject_unknown(f, {"kind", "steps"}, "functional");
  FunctionalSpec spec;
  const std::string kind = take<std::string>(f, "kind", "state_at");
  if (kind == "state_at") {
    spec.kind = FunctionalKind::StateAt;
    if (f.contains("steps")) {
      const Json& s = f.at("steps");
      if (s.is_string() && s.get<std::string>() == "all") {
        spec.steps.clear();
        for (int k = 0; k <= n_steps; ++k) spec.steps.push_back(k);
      } else {
        spec.steps = s.is_array() ? s.get<std::vector<int>>() : std::vector<int>{s.get<int>()};
      }
    }
  } else if (kind == "cumulative_state") {
    spec.kind = FunctionalKind::CumulativeState;
    spec.steps.clear();
  } else if (kind == "score") {
    spec.kind = FunctionalKind::Score;
    spec.steps.clear();
  } else {
    config_error("functional.kind must be state_at, cumulative_state or score");
  }
  return spec;
}

}  // namespace

std::vector<std::string> preset_names() { return {"sine", "sine_benchmark", "rnn8", "rnn32", "rnn64", "lv", "lg"}; }

Json preset_defaults(const std::string& name) {
  Json p;
  if (name == "sine" || name == "sine_benchmark") {
    const bool bench = name == "sine_benchmark";
    p = run_defaults(10, 100, {10}, {"BackwardIS"}, {{"kind", "state_at"}, {"steps", {0}}});
    p["model"] = sine_model_defaults(bench ? 30 : 1);
  } else if (name == "rnn8" || name == "rnn32" || name == "rnn64") {
    const int d = std::stoi(name.substr(3));
    p = run_defaults(100, 1000, {32}, {"BackwardIS", "PathSpace"}, {{"kind", "cumulative_state"}});
    p["model"] = {{"state_dim", d}, {"obs_dim", 4}, {"weight_seed", 2021}, {"variance", 0.1}};
  } else if (name == "lv") {
    p = run_defaults(300, 200, {20}, {"BackwardIS"}, {{"kind", "state_at"}, {"steps", "all"}});
    p["model"] = {{"a10", 2.0},
                  {"a11", 0.2},
                  {"a12", 1.0},
                  {"a20", 2.0},
                  {"a21", 1.0},
                  {"a22", 0.2},
                  {"gamma", matrix_json(0.1 * Matrix::Identity(2, 2))},
                  {"c", {1.0, 1.0}},
                  {"sigma", matrix_json(0.05 * Matrix::Identity(2, 2))},
                  {"x0", {1.0, 1.0}},
                  {"prior_log_sd", 0.1},
                  {"t_end", 3.0},
                  {"intensity", 1.0}};
    // The signed parametrix draws give Wald round counts a heavy tail.
    p["smoother"]["wald_max_rounds"] = 10'000'000;
  } else if (name == "lg") {
    p = run_defaults(20, 5000, {70}, {"BackwardIS"}, {{"kind", "state_at"}, {"steps", {0, 10, 20}}});
    p["model"] = {{"a", 0.9}, {"q", 1.0}, {"h", 1.0}, {"r", 1.0}, {"m0", 0.0}, {"p0", 1.0}};
  } else {
    config_error("unknown preset '" + name + "'");
  }
  return p;
}

Json all_preset_defaults() {
  Json all = Json::object();
  for (const auto& name : preset_names()) all[name] = preset_defaults(name);
  return all;
}

void ExperimentConfig::validate() const {
  if (replicates < 1) config_error("replicates must be at least 1");
  if (n_steps < 0) config_error("n_steps must be nonnegative");
  if (n_particles < 1) config_error("particles must be at least 1");
  if (backward.empty()) config_error("smoother.backward is empty");
  for (int k : backward) {
    if (k < 1) config_error("backward counts must be at least 1");
  }
  if (methods.empty()) config_error("smoother.methods is empty");
  if (threads < 1) config_error("threads must be at least 1");
  if (!seeds.empty()) {
    if (static_cast<int>(seeds.size()) != replicates) config_error("seeds must list one seed per replicate");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
      config_error("seeds must be distinct");
    }
  }
  if (functional.kind == FunctionalKind::StateAt) {
    if (functional.steps.empty()) config_error("functional.steps is empty");
    for (int k : functional.steps) {
      if (k < 0 || k > n_steps) config_error("functional step outside [0, n_steps]");
    }
  }
  if (rml.log_every < 1) config_error("rml.log_every must be at least 1");
  if (rml.random_starts < 0) config_error("rml.random_starts must be nonnegative");
  if (bench.particles.empty() || bench.methods.empty()) config_error("bench lists must be nonempty");
  if (out_dir.empty()) config_error("out directory is empty");
}

std::uint64_t ExperimentConfig::replicate_seed(int replicate) const {
  if (!seeds.empty()) return seeds.at(static_cast<std::size_t>(replicate));
  return derive_seed(seed, {stream_tag::kReplicate, static_cast<std::uint64_t>(replicate)});
}

Json ExperimentConfig::to_json() const {
  std::vector<std::string> method_names;
  for (auto m : methods) method_names.push_back(to_string(m));
  Json f;
  switch (functional.kind) {
    case FunctionalKind::StateAt: f = {{"kind", "state_at"}, {"steps", functional.steps}}; break;
    case FunctionalKind::CumulativeState: f = {{"kind", "cumulative_state"}}; break;
    case FunctionalKind::Score: f = {{"kind", "score"}}; break;
  }
  return {{"preset", preset},
          {"model", model},
          {"n_steps", n_steps},
          {"seed", seed},
          {"seeds", seeds},
          {"replicates", replicates},
          {"threads", threads},
          {"smoother",
           {{"particles", n_particles},
            {"backward", backward},
            {"methods", method_names},
            {"ar_max_proposals", ar_max_proposals},
            {"wald_max_rounds", wald_max_rounds}}},
          {"functional", f},
          {"rml",
           {{"gamma0", rml.gamma0},
            {"burn_in", rml.burn_in},
            {"kappa", rml.kappa},
            {"kappa_sweep", rml.kappa_sweep},
            {"starts", rml.starts},
            {"random_starts", rml.random_starts},
            {"start_low", rml.start_low},
            {"start_high", rml.start_high},
            {"log_every", rml.log_every}}},
          {"bench",
           {{"particles", bench.particles},
            {"methods", bench.methods},
            {"is_backward", bench.is_backward},
            {"ar_backward", bench.ar_backward}}},
          {"out", out_dir}};
}

ExperimentConfig parse_config(const Json& doc) {
  reject_unknown(doc, {"preset", "model", "n_steps", "seed", "seeds", "replicates", "threads", "smoother",
                       "functional", "rml", "bench", "out"},
                 "config");
  ExperimentConfig cfg;
  cfg.preset = take<std::string>(doc, "preset", "sine");
  const Json defaults = preset_defaults(cfg.preset);

  cfg.model = defaults.at("model");
  if (doc.contains("model")) {
    reject_unknown(doc.at("model"), [&] {
      std::set<std::string> keys;
      for (const auto& [k, v] : cfg.model.items()) keys.insert(k);
      return keys;
    }(), "model");
    cfg.model.merge_patch(doc.at("model"));
  }

  cfg.n_steps = take<int>(doc, "n_steps", defaults.at("n_steps").get<int>());
  cfg.seed = take<std::uint64_t>(doc, "seed", 1);
  cfg.seeds = take<std::vector<std::uint64_t>>(doc, "seeds", {});
  cfg.replicates = take<int>(doc, "replicates", cfg.seeds.empty() ? 1 : static_cast<int>(cfg.seeds.size()));
  cfg.threads = take<int>(doc, "threads", 1);
  cfg.out_dir = take<std::string>(doc, "out", "results");

  Json smoother = defaults.at("smoother");
  if (doc.contains("smoother")) {
    reject_unknown(doc.at("smoother"), {"particles", "backward", "methods", "method", "ar_max_proposals",
                                        "wald_max_rounds"},
                   "smoother");
    smoother.merge_patch(doc.at("smoother"));
  }
  cfg.n_particles = take<int>(smoother, "particles", 100);
  cfg.backward = backward_list(smoother.at("backward"));
  std::vector<std::string> names = take<std::vector<std::string>>(smoother, "methods", {});
  if (smoother.contains("method")) names = {take<std::string>(smoother, "method", "BackwardIS")};
  cfg.methods.clear();
  for (const auto& n : names) cfg.methods.push_back(parse_smoother_method(n));
  cfg.ar_max_proposals = take<long>(smoother, "ar_max_proposals", cfg.ar_max_proposals);
  cfg.wald_max_rounds = take<int>(smoother, "wald_max_rounds", cfg.wald_max_rounds);

  cfg.functional = parse_functional(doc.contains("functional") ? doc.at("functional") : defaults.at("functional"),
                                    cfg.n_steps);

  if (doc.contains("rml")) {
    const Json& r = doc.at("rml");
    reject_unknown(r, {"gamma0", "burn_in", "kappa", "kappa_sweep", "starts", "random_starts", "start_low",
                       "start_high", "log_every"},
                   "rml");
    cfg.rml.gamma0 = take<double>(r, "gamma0", cfg.rml.gamma0);
    cfg.rml.burn_in = take<int>(r, "burn_in", cfg.rml.burn_in);
    cfg.rml.kappa = take<double>(r, "kappa", cfg.rml.kappa);
    cfg.rml.kappa_sweep = take<std::vector<double>>(r, "kappa_sweep", {});
    cfg.rml.starts = take<std::vector<std::vector<double>>>(r, "starts", {});
    cfg.rml.random_starts = take<int>(r, "random_starts", 0);
    cfg.rml.start_low = take<double>(r, "start_low", cfg.rml.start_low);
    cfg.rml.start_high = take<double>(r, "start_high", cfg.rml.start_high);
    cfg.rml.log_every = take<int>(r, "log_every", 1);
  }
  if (doc.contains("bench")) {
    const Json& b = doc.at("bench");
    reject_unknown(b, {"particles", "methods", "is_backward", "ar_backward"}, "bench");
    cfg.bench.particles = take<std::vector<int>>(b, "particles", cfg.bench.particles);
    cfg.bench.methods = take<std::vector<std::string>>(b, "methods", cfg.bench.methods);
    if (b.contains("is_backward")) {
      const Json& v = b.at("is_backward");
      cfg.bench.is_backward = v.is_number_integer() ? std::to_string(v.get<int>()) : v.get<std::string>();
    }
    cfg.bench.ar_backward = take<int>(b, "ar_backward", cfg.bench.ar_backward);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config file " + path);
  Json doc;
  try {
    doc = Json::parse(in, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    config_error(path + ": " + e.what());
  }
  return parse_config(doc);
}

void apply_overrides(ExperimentConfig& cfg, const CliOverrides& o) {
  if (o.preset && *o.preset != cfg.preset) {
    // Switching preset resets every preset-owned block to the new defaults.
    Json doc = cfg.to_json();
    doc["preset"] = *o.preset;
    for (const auto& [key, value] : preset_defaults(*o.preset).items()) doc.erase(key);
    cfg = parse_config(doc);
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.out_dir) cfg.out_dir = *o.out_dir;
  if (o.replicates) {
    cfg.replicates = *o.replicates;
    cfg.seeds.clear();
  }
  if (o.method) cfg.methods = {parse_smoother_method(*o.method)};
  if (o.particles) cfg.n_particles = *o.particles;
  if (o.backward) cfg.backward = {*o.backward};
  if (o.steps) {
    const bool all_steps = cfg.functional.kind == FunctionalKind::StateAt &&
                           static_cast<int>(cfg.functional.steps.size()) == cfg.n_steps + 1;
    cfg.n_steps = *o.steps;
    if (all_steps) {
      cfg.functional.steps.clear();
      for (int k = 0; k <= cfg.n_steps; ++k) cfg.functional.steps.push_back(k);
    } else if (cfg.functional.kind == FunctionalKind::StateAt) {
      // Steps past the new horizon are dropped; the last step stands in if none remain.
      auto& steps = cfg.functional.steps;
      std::erase_if(steps, [&](int k) { return k > cfg.n_steps; });
      if (steps.empty()) steps.push_back(cfg.n_steps);
    }
  }
  cfg.validate();
}

std::uint64_t config_hash(const Json& doc) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : doc.dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace pmsmc::cli
