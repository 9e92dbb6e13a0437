// Serial reference vs OpenMP kernels. Arg 0 = serial, 1 = parallel.

#include <benchmark/benchmark.h>

#include "svytrans/bootstrap.hpp"
#include "svytrans/simulation.hpp"

using namespace svytrans;

namespace {

Execution policy(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::Serial : Execution::Parallel;
}

ScenarioConfig small_config() {
  ScenarioConfig c;
  c.population_size = 100000;
  c.gamma1 = 0.3;
  c.gamma2 = 0.3;
  c.gamma3 = 0.3;
  c.n_replications = 20;
  c.seed = 11;
  return c;
}

void BM_GeneratePopulation(benchmark::State& state) {
  const ScenarioConfig c = small_config();
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_population(c, c.seed, policy(state)));
  }
}

void BM_RunScenario(benchmark::State& state) {
  const ScenarioConfig c = small_config();
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_scenario(c, policy(state)));
  }
}

void BM_DoubleBootstrap(benchmark::State& state) {
  const ScenarioConfig c = small_config();
  const Population pop = generate_population(c, c.seed, Execution::Serial);
  Rng rng = make_rng(c.seed, 1);
  const SampleDraw draw = draw_samples(pop, c, rng);
  BootstrapPlan plan;
  plan.n_iterations = 100;
  plan.rng_seed = 5;
  plan.execution = policy(state);
  EstimandSpec spec;
  spec.covariate_subset = draw.dataset.covariate_names();
  for (auto _ : state) {
    benchmark::DoNotOptimize(double_bootstrap(draw.dataset, spec, plan, {}));
  }
}

}  // namespace

BENCHMARK(BM_GeneratePopulation)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RunScenario)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DoubleBootstrap)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
