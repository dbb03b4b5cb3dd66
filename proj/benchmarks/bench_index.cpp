#include <benchmark/benchmark.h>

#include "apslab/index.hpp"

#include <random>

using namespace apslab;

static void BM_IndexGraph(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Setup s{integer_spectrum(0.25, 2), 1.0, factory::random_graph(0.0, 42), factory::right_reference(0.0)};
  for (auto _ : state) benchmark::DoNotOptimize(index(s, n).index);
}
BENCHMARK(BM_IndexGraph)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_IndexOnceChiral(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Setup s{chiral_spectrum(0.0), 1.0, factory::chiral(1), factory::chiral(1)};
  auto p = instantiate(s, n);
  for (auto _ : state) benchmark::DoNotOptimize(index_once(p, false).index);
}
BENCHMARK(BM_IndexOnceChiral)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_S0Apply(benchmark::State& state) {
  Model m = build_model(integer_spectrum(0.0), static_cast<int>(state.range(0)));
  std::mt19937_64 rng(7);
  auto psi = random_cylinder_section(m.basis, 1.0, rng, 8, 32.0);
  for (auto _ : state) {
    auto phi = s0_apply(psi, m.sigma);
    benchmark::DoNotOptimize(phi.dim());
  }
}
BENCHMARK(BM_S0Apply)->Arg(64)->Arg(128);

BENCHMARK_MAIN();
