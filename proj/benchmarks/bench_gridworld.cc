#include <benchmark/benchmark.h>

#include <vector>

#include "pedflow/gridworld.hpp"
#include "pedflow/rng.hpp"
#include "pedflow/tasks.hpp"

using namespace pedflow;

namespace {

void BM_ResolveStep(benchmark::State& state) {
  const int n_agent = static_cast<int>(state.range(0));
  grid::Environment env(grid::tasks::task2_map(), grid::tasks::task2_plan(n_agent));
  Rng rng(9);
  std::vector<grid::Action> intents(n_agent);
  for (auto _ : state) {
    for (grid::Action& a : intents)
      a = static_cast<grid::Action>(rng.uniform_below(4));
    benchmark::DoNotOptimize(env.step(intents));
  }
}
BENCHMARK(BM_ResolveStep)->Arg(16)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_Observe(benchmark::State& state) {
  grid::Environment env(grid::tasks::task1_map(), grid::tasks::task1_plan(40));
  int agent = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(env.observe(agent));
    agent = (agent + 1) % env.n_agents();
  }
}
BENCHMARK(BM_Observe)->Unit(benchmark::kMicrosecond);

}  // namespace
