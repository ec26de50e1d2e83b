// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fed/errors.hpp"
#include "fed/experiment.hpp"
#include "fed/training.hpp"

namespace fed {
namespace {

// Small enough for a few optimizer steps per test.
RunConfig tiny_config() {
  return parse_config(
      "height = 32\nwidth = 16\npatch = 8\ndepth = 1\nchannels = 16\nencoder_heads = 2\n"
      "ids = 6\neval_ids = 3\nper_id = 4\neval_per_id = 4\nk = 2\nfdm_heads = 4\n"
      "ids_per_batch = 2\nsamples_per_id = 2\nepochs = 1\n");
}

std::vector<const Sample*> first_batch(const std::vector<Sample>& data) {
  return {&data[0], &data[1], &data[4], &data[5]};
}

TEST(Sgd, MomentumAndDecayByHand) {
  Parameter w("w", Tensor({1}, 1.0f), true);
  Parameter b("b", Tensor({1}, 1.0f));
  Sgd opt(0.5, 0.1);
  w.grad[0] = 2.0f;
  b.grad[0] = 2.0f;
  opt.step({&w, &b}, 0.1);
  EXPECT_FLOAT_EQ(w.value[0], 1.0f - 0.1f * 2.1f);
  EXPECT_FLOAT_EQ(b.value[0], 1.0f - 0.1f * 2.0f);
  const float w1 = w.value[0];
  opt.step({&w, &b}, 0.1);
  EXPECT_FLOAT_EQ(w.value[0], w1 - 0.1f * (0.5f * 2.1f + 2.0f + 0.1f * w1));
}

TEST(Sgd, ClipRescalesGlobalNorm) {
  Parameter a("a", Tensor({1}, 0.0f), false), b("b", Tensor({1}, 0.0f), false);
  a.grad[0] = 3.0f;
  b.grad[0] = 4.0f;
  Sgd opt(0.0, 0.0, 1.0);
  opt.step({&a, &b}, 1.0);
  EXPECT_FLOAT_EQ(a.value[0], -0.6f);
  EXPECT_FLOAT_EQ(b.value[0], -0.8f);
  a.grad[0] = 0.3f;
  b.grad[0] = 0.4f;
  opt.step({&a, &b}, 1.0);  // below the ceiling: untouched
  EXPECT_FLOAT_EQ(a.value[0], -0.9f);
}

TEST(CosineLr, Endpoints) {
  EXPECT_DOUBLE_EQ(cosine_lr(0.008, 0, 100), 0.008);
  EXPECT_NEAR(cosine_lr(0.008, 99, 100), 0.0, 1e-18);
  EXPECT_NEAR(cosine_lr(0.008, 50, 101), 0.004, 1e-15);
  double prev = 1.0;
  for (std::size_t s = 0; s < 100; ++s) {
    const double lr = cosine_lr(0.008, s, 100);
    EXPECT_LE(lr, prev);
    prev = lr;
  }
}

TEST(Sampler, BalancedBatchesUseEachChunkAtMostOnce) {
  std::vector<int> labels;
  for (int id = 0; id < 6; ++id) {
    for (int j = 0; j < 4; ++j) labels.push_back(id);
  }
  IdentitySampler sampler(labels, 3, 2);
  Rng rng(1);
  const auto batches = sampler.epoch(rng);
  // ids are drawn at random, so the last ones may run dry unevenly
  EXPECT_GE(batches.size(), 3u);
  EXPECT_LE(batches.size(), 4u);
  std::multiset<std::size_t> seen;
  for (const auto& b : batches) {
    ASSERT_EQ(b.size(), 6u);
    std::map<int, int> per;
    for (auto i : b) {
      ++per[labels[i]];
      seen.insert(i);
    }
    EXPECT_EQ(per.size(), 3u);
    for (auto [id, n] : per) EXPECT_EQ(n, 2);
  }
  for (auto i : seen) EXPECT_EQ(seen.count(i), 1u);
  EXPECT_THROW(IdentitySampler(labels, 7, 2), ConfigError);
}

TEST(Sampler, DeterministicPerSeed) {
  std::vector<int> labels{0, 0, 1, 1, 2, 2, 3, 3};
  IdentitySampler sampler(labels, 2, 2);
  Rng a(5), b(5);
  EXPECT_EQ(sampler.epoch(a), sampler.epoch(b));
}

TEST(LossAssembly, TermCountsPerAblationRow) {
  const RunConfig base = tiny_config();
  const auto data = generate_dataset(6, 4, 32, 16, 3);
  struct Expect {
    std::size_t mse, id, c, triplet;
  };
  const std::map<std::string, Expect> expected{
      {"baseline", {0, 2, 0, 1}}, {"+RE", {0, 2, 0, 1}},     {"+NPO", {0, 4, 2, 0}},
      {"+NPO+OEM", {2, 4, 2, 0}}, {"+NPO+FDM", {0, 6, 4, 0}}, {"full", {2, 6, 4, 0}},
  };
  for (const auto& row : ablation_rows()) {
    const RunConfig cfg = with_components(base, row.components);
    TrainState state(cfg, 1);
    init_banks(state, data);
    const auto batch = first_batch(data);
    const LossBreakdown b = train_step(state, batch, 0.001);
    const Expect& e = expected.at(row.name);
    EXPECT_EQ(b.count(LossGroup::Mse), e.mse) << row.name;
    EXPECT_EQ(b.count(LossGroup::Id), e.id) << row.name;
    EXPECT_EQ(b.count(LossGroup::Contrastive), e.c) << row.name;
    EXPECT_EQ(b.count(LossGroup::Triplet), e.triplet) << row.name;
    for (const auto& t : b.terms) EXPECT_TRUE(std::isfinite(t.value)) << t.name;
    EXPECT_NEAR(b.total, compose_total(b, cfg.train.loss_norm), 1e-12);
  }
}

TEST(LossAssembly, FullRowHasTwelveNamedTerms) {
  const RunConfig cfg = tiny_config();
  const auto data = generate_dataset(6, 4, 32, 16, 3);
  TrainState state(cfg, 1);
  init_banks(state, data);
  const auto b = train_step(state, first_batch(data), 0.001);
  EXPECT_EQ(b.terms.size(), 12u);
  for (const char* tag : {"holistic", "occluded"}) {
    for (const char* stem : {"mse.", "id.cls.", "id.oem.", "id.fdm.", "c.oem.", "c.fdm."}) {
      EXPECT_NE(b.find(std::string(stem) + tag), nullptr) << stem << tag;
    }
  }
  // holistic masks are all visible, so the MSE drives scores toward 1
  EXPECT_GE(b.find("mse.holistic")->value, 0.0);
}

TEST(LossAssembly, ComposeTotalWeights) {
  LossBreakdown b;
  b.terms = {{"a", LossGroup::Id, 2.0}, {"b", LossGroup::Id, 4.0}, {"c", LossGroup::Mse, 1.0},
             {"d", LossGroup::Triplet, 0.5}};
  EXPECT_DOUBLE_EQ(compose_total(b, LossNorm::Sum), 0.5 * (6.0 + 1.0 + 0.5));
  EXPECT_DOUBLE_EQ(compose_total(b, LossNorm::Mean), 3.0 + 1.0 + 0.5);
}

TEST(Training, UninitializedBanksRejected) {
  const RunConfig cfg = tiny_config();
  const auto data = generate_dataset(6, 4, 32, 16, 3);
  TrainState state(cfg, 1);
  EXPECT_THROW(train_step(state, first_batch(data), 0.001), StateError);
}

TEST(Training, BanksInitializedToIdentityMeans) {
  RunConfig cfg = tiny_config();
  const auto data = generate_dataset(6, 4, 32, 16, 3);
  TrainState state(cfg, 1);
  init_banks(state, data);
  ASSERT_TRUE(state.banks.oem.initialized());
  ASSERT_TRUE(state.banks.fdm.initialized());
  EXPECT_EQ(state.banks.oem.centers().rows(), 6u);
  EXPECT_EQ(state.banks.oem.centers().cols(), 64u);
  // a baseline row keeps no banks at all
  TrainState plain(with_components(cfg, ablation_rows()[0].components), 1);
  init_banks(plain, data);
  EXPECT_FALSE(plain.banks.oem.initialized());
}

TEST(Training, SharedEncoderReceivesGradient) {
  const RunConfig cfg = tiny_config();
  const auto data = generate_dataset(6, 4, 32, 16, 3);
  TrainState state(cfg, 1);
  init_banks(state, data);
  const Tensor before = state.model.parameters().front()->value;
  train_step(state, first_batch(data), 0.01);
  EXPECT_FALSE(state.model.parameters().front()->value.identical(before));
  EXPECT_EQ(state.step, 1u);
}

TEST(Training, LabelsOutsideRangeRejected) {
  const RunConfig cfg = tiny_config();
  auto data = generate_dataset(6, 4, 32, 16, 3);
  data[0].label = 6;
  EXPECT_THROW(train(data, cfg), ContractError);
}

TEST(Training, RunIsDeterministicAndRecomposes) {
  const RunConfig cfg = tiny_config();
  const auto data = generate_dataset(6, 4, 32, 16, 3);
  auto a = train(data, cfg);
  auto b = train(data, cfg);
  ASSERT_EQ(a.rows.size(), 6u);
  EXPECT_EQ(encode_checkpoint(a.state.checkpoint()), encode_checkpoint(b.state.checkpoint()));
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(format_metrics_row(a.rows[i]), format_metrics_row(b.rows[i]));
    const auto& br = a.breakdowns[i];
    EXPECT_NEAR(a.rows[i].total,
                0.5 * (a.rows[i].mse + a.rows[i].id + a.rows[i].metric), 1e-6);
    EXPECT_EQ(br.terms.size(), 12u);
  }
  EXPECT_EQ(a.rows.front().step, 1u);
  EXPECT_EQ(a.rows.front().epoch, 1u);
  EXPECT_DOUBLE_EQ(a.rows.front().lr, cfg.train.lr);
}

TEST(Training, DifferentSeedsDiffer) {
  RunConfig cfg = tiny_config();
  const auto data = generate_dataset(6, 4, 32, 16, 3);
  auto a = train(data, cfg);
  cfg.seed = 2;
  auto b = train(data, cfg);
  EXPECT_NE(encode_checkpoint(a.state.checkpoint()), encode_checkpoint(b.state.checkpoint()));
}

TEST(Training, CheckpointRestoresModel) {
  const RunConfig cfg = tiny_config();
  const auto data = generate_dataset(6, 4, 32, 16, 3);
  auto a = train(data, cfg);
  const NamedTensors saved = decode_checkpoint(encode_checkpoint(a.state.checkpoint()));
  EXPECT_NE(find_tensor(saved, "memory.oem.centers"), nullptr);
  EXPECT_NE(find_tensor(saved, "memory.fdm.centers"), nullptr);
  FedModel fresh(cfg, 99);
  NamedTensors model_only;
  for (const auto& [n, t] : saved) {
    if (n.rfind("memory.", 0) != 0) model_only.emplace_back(n, t);
  }
  fresh.load_state(model_only);
  std::vector<const Image*> imgs{&data[0].image, &data[5].image};
  EXPECT_TRUE(fresh.embed(imgs, true).identical(a.state.model.embed(imgs, true)));
}

TEST(Training, SecondEpochLossBelowFirst) {
  RunConfig cfg = parse_config(
      "height = 32\nwidth = 16\npatch = 8\ndepth = 1\nchannels = 16\nencoder_heads = 2\n"
      "ids = 10\neval_ids = 3\nper_id = 4\neval_per_id = 4\nk = 2\nfdm_heads = 4\n"
      "ids_per_batch = 2\nsamples_per_id = 2\nepochs = 2\nlr = 0.02\n");
  const auto data = generate_dataset(10, 4, 32, 16, 3);
  const auto run = train(data, cfg);
  double sum[2] = {0.0, 0.0};
  std::size_t n[2] = {0, 0};
  for (const auto& r : run.rows) {
    sum[r.epoch - 1] += r.total;
    ++n[r.epoch - 1];
  }
  ASSERT_GT(n[0], 0u);
  ASSERT_GT(n[1], 0u);
  EXPECT_LT(sum[1] / n[1], sum[0] / n[0]);
}

TEST(Metrics, CsvFormat) {
  MetricsRow r{2, 17, 0.5, 1.25, 0.0, 1.0, 0.25};
  EXPECT_EQ(format_metrics_row(r), "2,17,0.5,1.25,0,1,0.25");
  const auto path = std::filesystem::temp_directory_path() / "fed_test_metrics.csv";
  write_metrics_csv(path, {r});
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  EXPECT_EQ(ss.str(), std::string(kMetricsHeader) + "\n2,17,0.5,1.25,0,1,0.25\n");
  std::filesystem::remove(path);
  EXPECT_THROW(write_metrics_csv("/nonexistent/dir/m.csv", {r}), IoError);
}

}  // namespace
}  // namespace fed
