#include <benchmark/benchmark.h>

#include "pedflow/esn.hpp"
#include "pedflow/rng.hpp"

using namespace pedflow;

namespace {

esn::WeightBundle make_bundle(int n_res) {
  return esn::build_weight_bundle(n_res, esn::SparsityProfile{}, 42, 0.8, 1, false);
}

Eigen::VectorXd make_obs(std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd obs(esn::kObsDim);
  for (int i = 0; i < esn::kObsDim; ++i) obs(i) = rng.uniform01() < 0.2 ? 1.0 : 0.0;
  return obs;
}

void BM_BuildWeightBundle(benchmark::State& state) {
  const int n_res = static_cast<int>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        esn::build_weight_bundle(n_res, esn::SparsityProfile{}, ++seed, 0.8, 1, false));
  }
}
BENCHMARK(BM_BuildWeightBundle)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_SpectralRadius(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(7);
  const Eigen::MatrixXd w0 = esn::generate_sparse_matrix(n, n, 0.9, 1.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(esn::spectral_radius(w0));
}
BENCHMARK(BM_SpectralRadius)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_EvaluateCandidates(benchmark::State& state) {
  const int n_res = static_cast<int>(state.range(0));
  esn::WeightBundle bundle = make_bundle(n_res);
  Rng rng(3);
  for (int i = 0; i <= n_res; ++i) bundle.w_out[0](i) = rng.gaussian();
  const Eigen::VectorXd obs = make_obs(5);
  esn::ReservoirState reservoir(n_res);
  for (auto _ : state) {
    const esn::CandidateEvaluation eval =
        esn::evaluate_candidates(obs, reservoir, bundle, 0);
    esn::commit_action(reservoir, eval.states, 1);
  }
}
BENCHMARK(BM_EvaluateCandidates)->Arg(256)->Arg(1024)->Unit(benchmark::kMicrosecond);

// the runner's hot path: shared preactivations for a block of agents
void BM_BatchedForward(benchmark::State& state) {
  const int n_res = 256;
  const int n_agents = static_cast<int>(state.range(0));
  esn::WeightBundle bundle = make_bundle(n_res);
  Eigen::MatrixXd obs(esn::kObsDim, n_agents);
  for (int i = 0; i < n_agents; ++i) obs.col(i) = make_obs(100 + i);
  Eigen::MatrixXd states = Eigen::MatrixXd::Zero(n_res, n_agents);
  for (auto _ : state) {
    const Eigen::MatrixXd x_in =
        esn::input_preactivations(obs, states, bundle, nullptr);
    for (int i = 0; i < n_agents; ++i) {
      const esn::CandidateEvaluation eval =
          esn::finish_candidates(x_in.col(i), states.col(i), bundle, 0);
      benchmark::DoNotOptimize(eval.q);
    }
  }
}
BENCHMARK(BM_BatchedForward)->Arg(12)->Arg(64)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
