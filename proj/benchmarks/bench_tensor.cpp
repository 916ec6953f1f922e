#include <benchmark/benchmark.h>

#include "gcrec/graph.hpp"
#include "gcrec/rng.hpp"

using namespace gcrec;

static void BM_MatmulForward(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  RngStream rng(1);
  Tensor a = rng.gaussian_tensor({n, n});
  Tensor b = rng.gaussian_tensor({n, n});
  for (auto _ : state) {
    Graph g(false);
    NodeId y = g.matmul(g.constant(a.clone()), g.constant(b.clone()));
    benchmark::DoNotOptimize(g.value(y).at(0));
  }
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_MatmulForward)->Arg(64)->Arg(128)->Arg(256);

static void BM_LinearTrainStep(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  ParamStore ps;
  RngStream rng(2);
  ps.add("w", rng.gaussian_tensor({n, n}));
  ps.add("b", rng.gaussian_tensor({n}));
  Tensor x = rng.gaussian_tensor({32, n});
  for (auto _ : state) {
    ps.zero_grad();
    Graph g;
    NodeId y = g.linear(g.constant(x.clone()), g.param(ps, "w"), g.param(ps, "b"));
    g.backward(g.reduce_mean(g.mul(y, y)));
    benchmark::DoNotOptimize(ps.grad("w").at(0));
  }
}
BENCHMARK(BM_LinearTrainStep)->Arg(64)->Arg(256);

static void BM_GammaDraws(benchmark::State& state) {
  RngStream rng(3);
  for (auto _ : state) {
    double acc = 0;
    for (int i = 0; i < 1024; ++i) acc += rng.gamma(2.5, 0.8);
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * 1024);
}
BENCHMARK(BM_GammaDraws);
