#include <benchmark/benchmark.h>

#include "qsdnoise/dynamics.hpp"
#include "qsdnoise/noise.hpp"

using namespace qsdnoise;

static void BM_SampleShotTrain(benchmark::State& state) {
  const ShotNoiseParams p{15.0, 200.0};
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_shot_train(p, 250.0, RngStream(1, i++)));
  state.SetItemsProcessed(state.iterations() * 50000);
}
BENCHMARK(BM_SampleShotTrain);

static void BM_IntegrateQ(benchmark::State& state) {
  const SystemParams sys;
  const ShotTrain train = sample_shot_train({15.0, 200.0}, 50.0, RngStream(2));
  for (auto _ : state) benchmark::DoNotOptimize(integrate_q(sys, train, 1e-3, 50.0));
  state.SetItemsProcessed(state.iterations() * 50000);
}
BENCHMARK(BM_IntegrateQ)->Unit(benchmark::kMillisecond);

static void BM_FidelityEnsemble(benchmark::State& state) {
  const SystemParams sys;
  FidelityOptions o;
  o.n_trains = static_cast<std::size_t>(state.range(0));
  o.horizon = 50.0;
  o.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(fidelity_ensemble(sys, {15.0, 200.0}, o, RngStream(3)));
}
BENCHMARK(BM_FidelityEnsemble)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

static void BM_SampleOUPath(benchmark::State& state) {
  const OUParams p{0.2, 1e-3, 50000};
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_ou_path(p, RngStream(4, i++)));
}
BENCHMARK(BM_SampleOUPath)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
