// Serial reference vs OpenMP ensemble on the same model; results are bitwise equal.

#include <benchmark/benchmark.h>

#include "consensus/dynamics.hpp"

using namespace consensus;

namespace {

ModelSpec model(std::size_t n) {
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    a(i, i) = 0.5;
    a(i, (i + 1) % n) += 0.25;
    a(i, (i + n - 1) % n) += 0.25;
  }
  ModelSpec m;
  m.family = Family::kNoisyFeedback;
  m.n = n;
  m.schedule_a = MatrixSchedule::constant(StochasticMatrix(a));
  m.schedule_e = RatesSchedule::constant(LearningRates::uniform(n, 0.4));
  m.sigma_bar = 1.0;
  m.noise = NoiseSpec::standard_gaussian(n);
  m.x0 = StateVector(n, 0.0);
  return m;
}

void BM_EnsembleSerial(benchmark::State& state) {
  const ModelSpec m = model(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_ensemble_serial(m, 500, 256, 7));
  }
  state.SetItemsProcessed(state.iterations() * 256 * 500);
}

void BM_EnsembleOpenMP(benchmark::State& state) {
  const ModelSpec m = model(static_cast<std::size_t>(state.range(0)));
  const EnsembleOptions opts{.snapshot_times = {}, .threads = static_cast<int>(state.range(1))};
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_ensemble(m, 500, 256, 7, opts));
  }
  state.SetItemsProcessed(state.iterations() * 256 * 500);
}

}  // namespace

BENCHMARK(BM_EnsembleSerial)->Arg(2)->Arg(16)->Arg(64)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EnsembleOpenMP)
    ->ArgsProduct({{2, 16, 64}, {0, 2, 4}})
    ->ArgNames({"n", "threads"})
    ->UseRealTime()
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
