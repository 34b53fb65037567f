#include <benchmark/benchmark.h>

#include <random>

#include "graphfair/diffusion.hpp"
#include "graphfair/eval.hpp"
#include "graphfair/fairness.hpp"
#include "graphfair/link_predictor.hpp"

using namespace graphfair;

namespace {

Graph bench_graph(int per_group) {
  return sbm_generate({per_group, per_group, per_group}, 0.3, 0.05, 8, 7);
}

void BM_Matmul(benchmark::State& state) {
  const std::size_t n = state.range(0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Matrix a(n, n), b(n, n);
  for (double& v : a.data()) v = unif(rng);
  for (double& v : b.data()) v = unif(rng);
  for (auto _ : state) {
    ad::Tape tape;
    benchmark::DoNotOptimize(tape.matmul(tape.constant(a), tape.constant(b)));
  }
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

void BM_DeltaSp(benchmark::State& state) {
  const Graph g = bench_graph(state.range(0));
  const auto partition = SensitivePartition::from_graph(g);
  const auto prob = EdgeProbMatrix::from_graph(g);
  for (auto _ : state) benchmark::DoNotOptimize(delta_sp(prob, partition));
}
BENCHMARK(BM_DeltaSp)->Arg(50)->Arg(100);

void BM_BatchRegularizerGrad(benchmark::State& state) {
  const Graph g = bench_graph(100);
  const auto partition = SensitivePartition::from_graph(g);
  std::vector<int> batch(state.range(0));
  for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = static_cast<int>(i);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(-0.5, 0.5);
  Matrix block(batch.size(), batch.size());
  for (double& v : block.data()) v = unif(rng);
  for (auto _ : state) {
    ad::Tape tape;
    ad::Tensor probs = tape.sigmoid(tape.parameter(block));
    ad::Tensor loss = batch_ratio_regularizer_block(tape, probs, batch, partition);
    tape.backward(loss);
    benchmark::DoNotOptimize(loss.scalar());
  }
}
BENCHMARK(BM_BatchRegularizerGrad)->Arg(64)->Arg(128);

void BM_TrainLpEpoch(benchmark::State& state) {
  const Graph g = bench_graph(50);
  const EdgeSplit split = split_edges(g, 0.8, 3);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 100;
  cfg.hidden_dim = 16;
  cfg.seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train_lp(g, split, cfg));
}
BENCHMARK(BM_TrainLpEpoch);

void BM_DenoisePass(benchmark::State& state) {
  const Graph g = bench_graph(state.range(0));
  diffusion::DiffusionTrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 32;
  cfg.seed = 1;
  cfg.sizes.hidden = 24;
  cfg.sizes.s_hidden = 8;
  cfg.sizes.time_hidden = 8;
  cfg.sizes.edge_hidden = 24;
  const auto trained = diffusion::train_diffusion(g, cfg);
  const auto partition = SensitivePartition::from_graph(g);
  std::mt19937_64 rng(5);
  const auto noisy = diffusion::forward_noise(g, 1, trained.params.schedule,
                                              trained.params.channel_marginals, rng);
  for (auto _ : state)
    benchmark::DoNotOptimize(diffusion::denoise(noisy, partition, 1, trained.params));
}
BENCHMARK(BM_DenoisePass)->Arg(30)->Arg(60);

void BM_DegreeWasserstein(benchmark::State& state) {
  const Graph a = bench_graph(100);
  const Graph b = sbm_generate({100, 100, 100}, 0.25, 0.08, 8, 11);
  for (auto _ : state) benchmark::DoNotOptimize(eval::degree_wasserstein(a, b));
}
BENCHMARK(BM_DegreeWasserstein);

void BM_ForwardNoise(benchmark::State& state) {
  const Graph g = bench_graph(100);
  const auto schedule = diffusion::build_schedule(3, 0.008);
  const auto m = diffusion::marginals(g);
  const Matrix adj = g.adjacency();
  const Matrix xb = diffusion::binarize_features(g.features);
  std::mt19937_64 rng(9);
  for (auto _ : state)
    benchmark::DoNotOptimize(diffusion::forward_noise(adj, xb, 2, schedule, m, rng));
}
BENCHMARK(BM_ForwardNoise);

}  // namespace

BENCHMARK_MAIN();
