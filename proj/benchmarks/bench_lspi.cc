#include <benchmark/benchmark.h>

#include <vector>

#include "pedflow/lspi.hpp"
#include "pedflow/rng.hpp"

using namespace pedflow;

namespace {

std::vector<lspi::EpisodeTrace> make_traces(int n_agents, int length, int dim,
                                            std::uint64_t seed) {
  Rng rng(seed);
  std::vector<lspi::EpisodeTrace> traces(n_agents);
  for (lspi::EpisodeTrace& trace : traces) {
    for (int t = 0; t < length; ++t) {
      Eigen::VectorXd f(dim);
      for (int i = 0; i < dim - 1; ++i) f(i) = rng.gaussian();
      f(dim - 1) = 1.0;
      trace.features.push_back(f);
      trace.rewards.push_back(t + 1 < length ? 1.0 : 0.0);
    }
  }
  return traces;
}

// one episode-end training block: batch assembly, accumulation, solve, forget
void BM_EpisodeTraining(benchmark::State& state) {
  const int n_agents = static_cast<int>(state.range(0));
  const int dim = 257;  // N_res = 256 plus the bias slot
  const std::vector<lspi::EpisodeTrace> traces =
      make_traces(n_agents, 501, dim, 13);
  std::vector<const lspi::EpisodeTrace*> pointers;
  for (const lspi::EpisodeTrace& t : traces) pointers.push_back(&t);

  lspi::Accumulators acc(dim, 1e-4);
  for (auto _ : state) {
    acc.add_episode(lspi::build_episode_batch(pointers, 0.95));
    benchmark::DoNotOptimize(lspi::solve_output_weights(acc));
    acc.forget(0.95);
  }
}
BENCHMARK(BM_EpisodeTraining)->Arg(12)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_EpsilonGreedy(benchmark::State& state) {
  Rng rng(5);
  Eigen::VectorXd q(4);
  q << 0.3, -0.2, 0.9, 0.1;
  for (auto _ : state)
    benchmark::DoNotOptimize(lspi::epsilon_greedy(q, 0.02, rng));
}
BENCHMARK(BM_EpsilonGreedy);

}  // namespace
