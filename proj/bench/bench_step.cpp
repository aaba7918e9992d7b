#include <benchmark/benchmark.h>

#include "clforge/numlab.hpp"
#include "clforge/oracle.hpp"

using namespace clf;

namespace {

SimulationConfig config(int dims, int n) {
  SimulationConfig c;
  c.dims = dims;
  c.n = {n, dims > 1 ? n : 1, dims > 2 ? n : 1};
  c.functions["f"] = FunctionModel::power(1.0);
  c.functions["g"] = FunctionModel::power(2.0);
  c.functions["h"] = FunctionModel::exponential(0.5);
  c.initial = "1 + 1/2*cos(pi*x)*cos(pi*y)*cos(pi*z)";
  return c;
}

template <bool Parallel>
void BM_Step(benchmark::State& state) {
  const auto c = config(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  Problem p(c);
  auto u = initial_field(c, p.grid);
  std::vector<double> out(u.size());
  const double dt = stable_dt(p, u, 0.9, false);
  for (auto _ : state) {
    if constexpr (Parallel)
      step_parallel(p, u, dt, out);
    else
      step_serial(p, u, dt, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(u.size()));
  state.counters["threads"] = Parallel ? thread_cap() : 1;
}

}  // namespace

BENCHMARK_TEMPLATE(BM_Step, false)->Args({2, 128})->Args({2, 512})->Args({3, 64});
BENCHMARK_TEMPLATE(BM_Step, true)->Args({2, 128})->Args({2, 512})->Args({3, 64});

BENCHMARK_MAIN();
