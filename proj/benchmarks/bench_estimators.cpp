#include <benchmark/benchmark.h>

#include "pmsmc/estimators.hpp"
#include "pmsmc/models/lotka_volterra.hpp"
#include "pmsmc/models/sine.hpp"
#include "pmsmc/random.hpp"

namespace {

using namespace pmsmc;

void BM_GpeSine(benchmark::State& state) {
  const GpeConfig cfg = sine_gpe_config();
  const double delta = 0.5 * static_cast<double>(state.range(0));
  const Vector theta = Vector::Constant(1, kPi / 4);
  const Vector x = Vector::Constant(1, 0.0), y = Vector::Constant(1, 0.3);
  RandomStream rng(11);
  long events = 0;
  for (auto _ : state) {
    const DensityDraw d = gpe_transition_estimate(cfg, theta, x, y, delta, rng);
    events += d.aux_events;
    benchmark::DoNotOptimize(d.value);
  }
  state.counters["bridge_points"] = benchmark::Counter(static_cast<double>(events), benchmark::Counter::kAvgIterations);
}
BENCHMARK(BM_GpeSine)->Arg(1)->Arg(2)->Arg(4);

void BM_GpeScore(benchmark::State& state) {
  const GpeConfig cfg = sine_gpe_config();
  const Vector theta = Vector::Constant(1, kPi / 4);
  const Vector x = Vector::Constant(1, -1.0), y = Vector::Constant(1, -0.2);
  RandomStream rng(12);
  for (auto _ : state) benchmark::DoNotOptimize(gpe_grad_log_transition(cfg, theta, x, y, 0.5, rng));
}
BENCHMARK(BM_GpeScore);

void BM_ParametrixLotkaVolterra(benchmark::State& state) {
  const LotkaVolterraSpec spec;
  const ParametrixConfig cfg = lv_parametrix_config(spec, 0.01 * static_cast<double>(state.range(0)));
  Vector x(2), y(2);
  x << 1.0, 1.0;
  y << 1.01, 0.99;
  RandomStream rng(13);
  long events = 0;
  for (auto _ : state) {
    const DensityDraw d = parametrix_transition_estimate(cfg, x, y, rng);
    events += d.aux_events;
    benchmark::DoNotOptimize(d.value);
  }
  state.counters["weight_updates"] = benchmark::Counter(static_cast<double>(events), benchmark::Counter::kAvgIterations);
}
BENCHMARK(BM_ParametrixLotkaVolterra)->Arg(1)->Arg(10);

}  // namespace
