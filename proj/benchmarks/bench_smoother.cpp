#include <benchmark/benchmark.h>

#include "pmsmc/models/sine.hpp"
#include "pmsmc/smoother.hpp"

namespace {

using namespace pmsmc;

struct SineFixture {
  SineSpec spec = sine_benchmark_spec();
  SimulatedData data = simulate_sine(spec, 10, 303);
  SsmDefinition model = sine_model(spec);
};

const SineFixture& sine_fixture() {
  static const SineFixture fixture;
  return fixture;
}

void run_sine(benchmark::State& state, SmootherMethod method) {
  const SineFixture& f = sine_fixture();
  SmootherConfig cfg;
  cfg.n_particles = static_cast<int>(state.range(0));
  cfg.n_backward = static_cast<int>(state.range(1));
  cfg.method = method;
  cfg.ar_bound = sine_ar_bound(f.spec);
  std::uint64_t seed = 1;
  long calls = 0;
  for (auto _ : state) {
    const SmoothingResult r = smooth_online(f.model, state_at(1, 0), f.data.observations, cfg, seed++);
    calls += r.estimator_calls;
    benchmark::DoNotOptimize(r.estimate.data());
  }
  state.counters["estimator_calls"] = benchmark::Counter(static_cast<double>(calls), benchmark::Counter::kAvgIterations);
}

void BM_SineBackwardIS(benchmark::State& state) { run_sine(state, SmootherMethod::BackwardIS); }
BENCHMARK(BM_SineBackwardIS)->Args({100, 2})->Args({100, 10})->Args({100, 50})->Unit(benchmark::kMillisecond);

void BM_SineBackwardAR(benchmark::State& state) { run_sine(state, SmootherMethod::BackwardAR); }
BENCHMARK(BM_SineBackwardAR)->Args({100, 2})->Args({100, 10})->Unit(benchmark::kMillisecond);

}  // namespace
