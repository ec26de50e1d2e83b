// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "fed/experiment.hpp"
#include "fed/graph.hpp"
#include "fed/memory.hpp"
#include "fed/npo.hpp"
#include "fed/ops.hpp"
#include "fed/retrieval.hpp"
#include "fed/training.hpp"

namespace {

fed::Tensor filled(fed::Shape shape, fed::Rng& rng) {
  fed::Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<fed::real>(rng.uniform(-1, 1));
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  fed::Rng rng(1);
  const fed::Tensor a = filled({n, n}, rng), b = filled({n, n}, rng);
  for (auto _ : state) {
    fed::Graph g(false);
    benchmark::DoNotOptimize(g.value(fed::matmul(g, g.constant(a), g.constant(b))).data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256)->Arg(512);

void BM_EncoderForward(benchmark::State& state) {
  const fed::RunConfig cfg;
  fed::FedModel model(cfg, 1);
  const auto data = fed::generate_dataset(4, 8, cfg.encoder.height, cfg.encoder.width, 1);
  std::vector<const fed::Image*> imgs;
  for (const auto& s : data) imgs.push_back(&s.image);
  for (auto _ : state) benchmark::DoNotOptimize(model.embed(imgs, true).data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(imgs.size()));
}
BENCHMARK(BM_EncoderForward)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const fed::RunConfig cfg;
  const auto data = fed::generate_dataset(cfg.data.ids, cfg.data.per_id, cfg.encoder.height, cfg.encoder.width, 1);
  fed::TrainState ts(cfg, 1);
  fed::init_banks(ts, data);
  std::vector<const fed::Sample*> batch;
  for (std::size_t id = 0; id < cfg.train.ids_per_batch; ++id) {
    for (std::size_t j = 0; j < cfg.train.samples_per_id; ++j) batch.push_back(&data[id * cfg.data.per_id + j]);
  }
  for (auto _ : state) benchmark::DoNotOptimize(fed::train_step(ts, batch, 1e-4).total);
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_AugmentPair(benchmark::State& state) {
  const auto patches = fed::generate_patch_set(30, 1);
  const auto data = fed::generate_dataset(2, 2, 64, 32, 1);
  fed::Rng rng(2);
  for (auto _ : state) benchmark::DoNotOptimize(fed::augment_pair(data[0].image, patches, rng).mask);
}
BENCHMARK(BM_AugmentPair);

void BM_BankSearch(benchmark::State& state) {
  fed::Rng rng(3);
  fed::MemoryBank bank(fed::BankTag::PostOem, filled({static_cast<std::size_t>(state.range(0)), 256}, rng));
  std::vector<fed::real> q(256);
  for (auto& v : q) v = static_cast<fed::real>(rng.uniform(-1, 1));
  for (auto _ : state) benchmark::DoNotOptimize(bank.search(q, 0, 8));
}
BENCHMARK(BM_BankSearch)->Arg(20)->Arg(702);

}  // namespace

BENCHMARK_MAIN();
