#include <benchmark/benchmark.h>

#include "rdstream/diffusion.hpp"
#include "rdstream/estimator.hpp"
#include "rdstream/stream_engine.hpp"
#include "rdstream/synthetic.hpp"

using namespace rdstream;

namespace {

SyntheticStream window_data(std::size_t keys, std::size_t locs) {
  SyntheticSpec spec;
  spec.length = 104;
  spec.keys = keys;
  spec.locs = locs;
  spec.shift_at.reset();
  spec.seed = 5;
  return make_synthetic(spec);
}

void BM_Generate(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  RDParams p = RDParams::zero(d, d);
  p.growth.setConstant(0.01);
  p.initial.setConstant(1.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j + 1 < d; ++j) p.diffusion(i, j, j + 1) = 0.02;
  for (auto _ : state) benchmark::DoNotOptimize(generate(p, 104));
}
BENCHMARK(BM_Generate)->Arg(1)->Arg(2)->Arg(4);

void BM_FitLm(benchmark::State& state) {
  const SyntheticStream s = window_data(6, 8);
  RDParams start = s.trend.rd;
  start.growth.setZero();
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_lm(s.trend_part, s.trend.w_key, s.trend.w_loc, start));
  }
}
BENCHMARK(BM_FitLm)->Unit(benchmark::kMillisecond);

// Estimation time against the number of keywords, ranks and window fixed.
void BM_ModelEstimation(benchmark::State& state) {
  const SyntheticStream s = window_data(static_cast<std::size_t>(state.range(0)), 16);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model_estimation(s.stream, Ranks{2, 2, 1}, 0, 104));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ModelEstimation)->RangeMultiplier(2)->Range(8, 64)->Unit(benchmark::kMillisecond)->Complexity();

void BM_StreamSteps(benchmark::State& state) {
  SyntheticSpec spec;
  spec.length = 104 + static_cast<std::size_t>(state.range(0));
  spec.shift_at.reset();
  const SyntheticStream s = make_synthetic(spec);
  StreamConfig config;
  config.grid.dk = {2, 2};
  config.grid.dl = {2, 2};
  config.grid.ds = {1, 1};
  for (auto _ : state) benchmark::DoNotOptimize(run_stream(s.stream, config));
}
BENCHMARK(BM_StreamSteps)->Arg(10)->Arg(40)->Unit(benchmark::kMillisecond)->Iterations(1);

}  // namespace

BENCHMARK_MAIN();
