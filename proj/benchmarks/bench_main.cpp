#include <benchmark/benchmark.h>

#include "fibrelab/harness.hpp"

using namespace fibrelab;

namespace {

InstanceGenConfig config(std::uint64_t seed) {
  InstanceGenConfig cfg;
  cfg.seed = seed;
  return cfg;
}

void BM_MatVec(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const InstanceGenConfig cfg = config(1);
  RMatrix w(n, n);
  RVector x(n), b(n);
  for (std::size_t r = 0; r < n; ++r) {
    x[r] = random_coefficient(rng, cfg);
    b[r] = random_coefficient(rng, cfg);
    for (std::size_t c = 0; c < n; ++c) w.at(r, c) = random_coefficient(rng, cfg);
  }
  for (auto _ : state) benchmark::DoNotOptimize(mat_vec_mul_add(w, x, b));
}
BENCHMARK(BM_MatVec)->Arg(4)->Arg(16)->Arg(64);

void BM_GraphForward(benchmark::State& state) {
  const auto mode = static_cast<CompileMode>(state.range(0));
  const GraphCase c = generate_graph_case(config(2), 0, mode, false);
  for (auto _ : state) benchmark::DoNotOptimize(direct_output(c));
}
BENCHMARK(BM_GraphForward)->Arg(0)->Arg(1)->Arg(2);

void BM_CompileAndEvaluate(benchmark::State& state) {
  const auto mode = static_cast<CompileMode>(state.range(0));
  const GraphCase c = generate_graph_case(config(3), 0, mode, false);
  for (auto _ : state) {
    const CompiledFibring compiled = compile_case(c);
    const RVector x = c.graph.features.at(c.u);
    benchmark::DoNotOptimize(evaluate_fibred(compiled.network(c.graph.features), x).first);
  }
}
BENCHMARK(BM_CompileAndEvaluate)->Arg(0)->Arg(1)->Arg(2);

void BM_BuildCompatible(benchmark::State& state) {
  InstanceGenConfig cfg = config(4);
  cfg.population = Population::Mixed;
  const FibredCase fc = generate_fibred_case(cfg, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_compatible(fc.network, fc.x));
}
BENCHMARK(BM_BuildCompatible)->DenseRange(0, 3);

void BM_ModelCheck(benchmark::State& state) {
  InstanceGenConfig cfg = config(5);
  const FibredCase fc = generate_fibred_case(cfg, 0);
  const CompatibleModel cm = build_compatible(fc.network, fc.x);
  const Formula phi = characteristic_formula({fc.network.root_instance, fc.x.dim(), std::nullopt, std::nullopt});
  const Formula psi = psi_formula(phi, fc.network.architecture);
  const ComponentId root = ComponentId::input(fc.network.architecture.root());
  const WorldId w = cm.root_world(fc.x);
  for (auto _ : state) benchmark::DoNotOptimize(check_satisfaction(cm.model, root, w, psi));
}
BENCHMARK(BM_ModelCheck);

void BM_FormulaRoundTrip(benchmark::State& state) {
  Rng rng(6);
  const Formula f = random_formula(rng, 4, {ComponentId::input("w0"), ComponentId::at_layer("w0.1", 2)}, 6);
  for (auto _ : state) benchmark::DoNotOptimize(parse_formula(print_formula(f)));
}
BENCHMARK(BM_FormulaRoundTrip);

}  // namespace

BENCHMARK_MAIN();
