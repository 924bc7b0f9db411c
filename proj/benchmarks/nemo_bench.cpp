#include <benchmark/benchmark.h>

#include <random>

#include "nemo/evaluation.hpp"
#include "nemo/kernels.hpp"
#include "nemo/model.hpp"
#include "nemo/sampling.hpp"
#include "nemo/synth.hpp"
#include "nemo/training.hpp"

using namespace nemo;

namespace {

SparseMatrix random_csr(std::size_t rows, std::size_t cols, std::size_t per_row, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Triplet> t;
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < per_row; ++k) t.push_back({r, static_cast<std::uint32_t>(rng() % cols), 1.0});
  return SparseMatrix::from_triplets(rows, cols, std::move(t));
}

DenseMatrix random_dense(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  DenseMatrix m(rows, cols);
  for (auto& v : m.values()) v = n(rng);
  return m;
}

// Synthetic default plus a model, split and epoch graph, built once.
struct World {
  Dataset data = synth_generate(SynthConfig{}).dataset;
  DatasetSplit split = split_interactions(data, 1);
  ModelConfig config;
  TrainingContext ctx = make_training_context(data, split, config);
  NemoModel model{config, data.num_users, data.num_items, data.user_features.cols(), data.item_features.cols(), 1};
  std::vector<Interaction> negatives =
      static_resample(ctx.observed, data.num_items, SamplerConfig{}, 0, 1).pairs();
  BipartiteGraph graph = build_bipartite(data.num_users, data.num_items, split.train, negatives);
};

World& world() {
  static World w;
  return w;
}

}  // namespace

static void BM_Spmm(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto dim = static_cast<std::size_t>(state.range(1));
  const auto s = random_csr(rows, rows, 10, 1);
  const auto d = random_dense(rows, dim, 2);
  for (auto _ : state) benchmark::DoNotOptimize(spmm(s, d));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * s.nnz() * dim));
}
BENCHMARK(BM_Spmm)->Args({1000, 16})->Args({10000, 16})->Args({10000, 64});

static void BM_SpmmTransposed(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto s = random_csr(rows, rows, 10, 3);
  const auto d = random_dense(rows, 16, 4);
  for (auto _ : state) benchmark::DoNotOptimize(spmm_transposed(s, d));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * s.nnz() * 16));
}
BENCHMARK(BM_SpmmTransposed)->Arg(1000)->Arg(10000);

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_dense(n, 16, 5), b = random_dense(16, 16, 6);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
}
BENCHMARK(BM_Matmul)->Arg(240)->Arg(4096);

static void BM_Forward(benchmark::State& state) {
  auto& w = world();
  for (auto _ : state) {
    Tape tape;
    auto f = forward(tape, w.model, w.data, w.ctx.social, w.graph);
    benchmark::DoNotOptimize(f.out.user.value().values().data());
  }
}
BENCHMARK(BM_Forward)->Unit(benchmark::kMicrosecond);

static void BM_ForwardBackward(benchmark::State& state) {
  auto& w = world();
  std::vector<std::uint32_t> users, items;
  std::vector<double> targets;
  for (const auto& p : w.split.train) {
    users.push_back(p.user);
    items.push_back(p.item);
    targets.push_back(1.0);
  }
  for (auto _ : state) {
    Tape tape;
    auto f = forward(tape, w.model, w.data, w.ctx.social, w.graph);
    Var loss = squared_error(row_dot(gather_rows(f.out.user, users), gather_rows(f.out.item, items)), targets);
    tape.backward(loss);
  }
}
BENCHMARK(BM_ForwardBackward)->Unit(benchmark::kMicrosecond);

static void BM_TrainEpoch(benchmark::State& state) {
  auto& w = world();
  SamplerConfig sampler;
  TrainingConfig config;
  AdamState adam;
  std::size_t epoch = 0;
  for (auto _ : state) benchmark::DoNotOptimize(train_epoch(w.ctx, w.model, adam, sampler, config, epoch++, w.graph).loss);
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

static void BM_Evaluate(benchmark::State& state) {
  auto& w = world();
  const auto reps = representations_with(w.ctx, w.model, w.negatives);
  RankingProtocol protocol;
  for (auto _ : state) {
    auto r = evaluate(inner_product_scorer(reps.user, reps.item), w.split.test, w.ctx.observed, w.data.num_items,
                      protocol);
    benchmark::DoNotOptimize(r.ndcg.data());
  }
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
