#include <benchmark/benchmark.h>

#include "cdfgnn/bsp_runtime.hpp"
#include "cdfgnn/graph_store.hpp"
#include "cdfgnn/partitioner.hpp"

namespace {

using namespace cdfgnn;

// One training epoch on the 2000-vertex planted fixture over 2 hosts x 2 workers.
void BM_Epoch(benchmark::State& state) {
  const auto g = gen_power_law(2000, 3, 11);
  const auto data = gen_planted_features(g, 4, 32, 0.1, 11);
  const auto plan = partition(g, {2, 2}).plan;
  RuntimeConfig c;
  c.hidden_dim = 64;
  c.cache_enabled = state.range(0) != 0;
  c.quant_enabled = state.range(1) != 0;
  Runtime<double> rt(g, data.features, data.labels, plan, c);
  for (auto _ : state) benchmark::DoNotOptimize(rt.run_epoch());
}
BENCHMARK(BM_Epoch)->Args({0, 0})->Args({1, 0})->Args({1, 1})->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
