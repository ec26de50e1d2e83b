// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fed/config.hpp"
#include "fed/memory.hpp"
#include "fed/model.hpp"
#include "fed/rng.hpp"
#include "fed/synthetic.hpp"

namespace fed {

/// SGD with heavy-ball momentum; weight decay on parameters flagged `decay`.
///   v <- mu * v + (g + wd * w);  w <- w - lr * v
/// With clip > 0, g is first rescaled so its global L2 norm is at most clip.
/// Holds only velocity buffers, indexed by position in `params`, so owners
/// of the parameters stay movable.
class Sgd {
 public:
  Sgd(double momentum, double weight_decay, double clip = 0.0)
      : momentum_(momentum), weight_decay_(weight_decay), clip_(clip) {}

  void step(const std::vector<Parameter*>& params, double lr);

 private:
  std::vector<std::vector<real>> velocity_;
  double momentum_;
  double weight_decay_;
  double clip_;
};

/// Cosine decay from `base` at step 0 to 0 at step total-1.
double cosine_lr(double base, std::size_t step, std::size_t total);

/// P identities x S samples per batch. Each epoch shuffles every identity's
/// samples into chunks of S and draws P distinct identities at a time until
/// fewer than P identities have chunks left.
class IdentitySampler {
 public:
  IdentitySampler(const std::vector<int>& labels, std::size_t ids_per_batch, std::size_t samples_per_id);

  std::vector<std::vector<std::size_t>> epoch(Rng& rng) const;

 private:
  std::vector<std::vector<std::size_t>> by_id_;
  std::size_t p_;
  std::size_t s_;
};

enum class LossGroup { Mse, Id, Contrastive, Triplet };

struct LossTerm {
  std::string name;
  LossGroup group;
  double value;
};

struct LossBreakdown {
  std::vector<LossTerm> terms;
  double total = 0.0;

  double group_sum(LossGroup group) const;
  std::size_t count(LossGroup group) const;
  const LossTerm* find(const std::string& name) const;
};

/// Total loss from logged terms. Sum: half of every group's sum. Mean: each
/// group's mean. Triplet terms count as their own group.
double compose_total(const LossBreakdown& breakdown, LossNorm norm);

struct Banks {
  MemoryBank oem;
  MemoryBank fdm;
};

struct TrainState {
  TrainState(const RunConfig& config, std::uint64_t seed);

  RunConfig config;
  FedModel model;
  Sgd optimizer;
  Banks banks;
  std::vector<OcclusionPatch> patches;
  Rng rng;
  std::size_t step = 0;

  bool needs_oem_bank() const;
  bool needs_fdm_bank() const;

  /// Checkpoint contents: model parameters plus memory centers.
  NamedTensors checkpoint();
};

/// One forward pass over `dataset` (no augmentation) to set every needed bank
/// to its identity means.
void init_banks(TrainState& state, const std::vector<Sample>& dataset);

/// One iteration: augment, run both branches, assemble the loss, backward,
/// SGD update, then update banks from holistic-branch features.
LossBreakdown train_step(TrainState& state, std::span<const Sample* const> batch, double lr);

struct MetricsRow {
  std::size_t epoch;
  std::size_t step;
  double lr;
  double total;
  double mse;
  double id;
  double metric;  // contrastive terms, or triplet terms for baseline rows
};

struct TrainResult {
  TrainState state;
  std::vector<MetricsRow> rows;
  std::vector<LossBreakdown> breakdowns;
};

using StepCallback = std::function<void(const MetricsRow&, const LossBreakdown&)>;

/// Full run: identity-balanced sampling, cosine-decayed lr, per-step metrics.
TrainResult train(const std::vector<Sample>& dataset, const RunConfig& config,
                  const StepCallback& on_step = {});

inline constexpr const char* kMetricsHeader = "epoch,step,lr,l_total,l_mse,l_id,l_c";
std::string format_metrics_row(const MetricsRow& row);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);

}  // namespace fed
