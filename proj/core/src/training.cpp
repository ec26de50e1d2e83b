// SPDX-License-Identifier: Apache-2.0
#include "fed/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>

#include "fed/errors.hpp"
#include "fed/npo.hpp"
#include "fed/ops.hpp"

namespace fed {

void Sgd::step(const std::vector<Parameter*>& params, double lr) {
  if (velocity_.empty()) {
    for (Parameter* p : params) velocity_.emplace_back(p->value.numel(), 0.0f);
  }
  if (velocity_.size() != params.size()) throw ContractError("Sgd::step: parameter list changed");
  real gain = 1.0f;
  if (clip_ > 0.0) {
    double sq = 0.0;
    for (const Parameter* p : params) {
      if (!p->trainable) continue;
      for (real g : p->grad.vec()) sq += static_cast<double>(g) * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > clip_) gain = static_cast<real>(clip_ / norm);
  }
  const auto mu = static_cast<real>(momentum_);
  const auto lrf = static_cast<real>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (!p.trainable) continue;
    const real wd = p.decay ? static_cast<real>(weight_decay_) : 0.0f;
    auto& v = velocity_[i];
    real* w = p.value.data();
    const real* g = p.grad.data();
    for (std::size_t j = 0; j < v.size(); ++j) {
      v[j] = mu * v[j] + (gain * g[j] + wd * w[j]);
      w[j] -= lrf * v[j];
    }
  }
}

double cosine_lr(double base, std::size_t step, std::size_t total) {
  if (total <= 1) return base;
  const double t = static_cast<double>(std::min(step, total - 1)) / static_cast<double>(total - 1);
  return 0.5 * base * (1.0 + std::cos(std::numbers::pi * t));
}

IdentitySampler::IdentitySampler(const std::vector<int>& labels, std::size_t ids_per_batch,
                                 std::size_t samples_per_id)
    : p_(ids_per_batch), s_(samples_per_id) {
  if (p_ == 0 || s_ == 0) throw ConfigError("sampler needs positive batch dimensions");
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  for (auto& [id, idx] : groups) {
    if (idx.size() < s_) {
      throw ConfigError("sampler: identity " + std::to_string(id) + " has " +
                        std::to_string(idx.size()) + " samples, needs " + std::to_string(s_));
    }
    by_id_.push_back(std::move(idx));
  }
  if (by_id_.size() < p_) {
    throw ConfigError("sampler: " + std::to_string(by_id_.size()) + " identities, batch needs " +
                      std::to_string(p_));
  }
}

std::vector<std::vector<std::size_t>> IdentitySampler::epoch(Rng& rng) const {
  auto shuffle = [&rng](auto& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }
  };
  std::vector<std::vector<std::vector<std::size_t>>> chunks(by_id_.size());
  for (std::size_t k = 0; k < by_id_.size(); ++k) {
    auto idx = by_id_[k];
    shuffle(idx);
    for (std::size_t start = 0; start + s_ <= idx.size(); start += s_) {
      chunks[k].emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start),
                             idx.begin() + static_cast<std::ptrdiff_t>(start + s_));
    }
  }
  std::vector<std::size_t> available;
  for (std::size_t k = 0; k < chunks.size(); ++k) {
    if (!chunks[k].empty()) available.push_back(k);
  }
  std::vector<std::vector<std::size_t>> batches;
  while (available.size() >= p_) {
    shuffle(available);
    std::vector<std::size_t> batch;
    for (std::size_t j = 0; j < p_; ++j) {
      auto& c = chunks[available[j]];
      batch.insert(batch.end(), c.back().begin(), c.back().end());
      c.pop_back();
    }
    batches.push_back(std::move(batch));
    std::erase_if(available, [&chunks](std::size_t k) { return chunks[k].empty(); });
    std::sort(available.begin(), available.end());
  }
  return batches;
}

double LossBreakdown::group_sum(LossGroup group) const {
  double s = 0.0;
  for (const auto& t : terms) {
    if (t.group == group) s += t.value;
  }
  return s;
}

std::size_t LossBreakdown::count(LossGroup group) const {
  return static_cast<std::size_t>(
      std::count_if(terms.begin(), terms.end(), [group](const LossTerm& t) { return t.group == group; }));
}

const LossTerm* LossBreakdown::find(const std::string& name) const {
  for (const auto& t : terms) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

namespace {

constexpr LossGroup kGroups[] = {LossGroup::Mse, LossGroup::Id, LossGroup::Contrastive, LossGroup::Triplet};

double term_weight(const LossBreakdown& b, LossGroup group, LossNorm norm) {
  if (norm == LossNorm::Sum) return 0.5;
  const std::size_t n = b.count(group);
  return n == 0 ? 0.0 : 1.0 / static_cast<double>(n);
}

}  // namespace

double compose_total(const LossBreakdown& breakdown, LossNorm norm) {
  double total = 0.0;
  for (LossGroup g : kGroups) {
    if (norm == LossNorm::Sum) {
      total += 0.5 * breakdown.group_sum(g);
    } else if (const std::size_t n = breakdown.count(g); n > 0) {
      total += breakdown.group_sum(g) / static_cast<double>(n);
    }
  }
  return total;
}

TrainState::TrainState(const RunConfig& cfg, std::uint64_t seed)
    : config(cfg),
      model(cfg, derive_seed(seed, "model")),
      optimizer(cfg.train.momentum, cfg.train.weight_decay, cfg.train.grad_clip),
      patches(generate_patch_set(cfg.data.patches, derive_seed(seed, "patches"))),
      rng(derive_seed(seed, "augment")) {}

bool TrainState::needs_oem_bank() const {
  const Components& c = config.train.components;
  return c.contrastive || c.fdm;
}

bool TrainState::needs_fdm_bank() const {
  const Components& c = config.train.components;
  return c.contrastive && c.fdm;
}

NamedTensors TrainState::checkpoint() {
  NamedTensors out = model.state();
  if (banks.oem.initialized()) out.emplace_back("memory.oem.centers", banks.oem.centers());
  if (banks.fdm.initialized()) out.emplace_back("memory.fdm.centers", banks.fdm.centers());
  return out;
}

namespace {

struct OemFeatures {
  Tensor weighted;  // [N x 4c]
  Tensor scores;    // [N x 4]
};

OemFeatures forward_oem(FedModel& model, std::span<const Image* const> images, bool oem_enabled) {
  Graph g(false);
  Var tokens = model.encoder.encode(g, images);
  Var parts = model.encoder.part_pool(g, tokens, images.size());
  auto out = model.oem.forward(g, parts, images.size(), oem_enabled);
  return {g.value(out.weighted), g.value(out.scores)};
}

std::vector<std::vector<std::size_t>> singleton_rows(std::size_t begin, std::size_t count) {
  std::vector<std::vector<std::size_t>> rows;
  for (std::size_t i = 0; i < count; ++i) rows.push_back({begin + i});
  return rows;
}

}  // namespace

void init_banks(TrainState& state, const std::vector<Sample>& dataset) {
  if (!state.needs_oem_bank()) return;
  const Components& comp = state.config.train.components;
  const std::size_t num_ids = state.model.num_ids();
  const real momentum = state.config.train.memory_momentum;
  constexpr std::size_t kChunk = 32;

  std::map<int, std::vector<std::vector<real>>> oem_feats;
  std::vector<OemFeatures> chunks;
  std::vector<std::vector<int>> chunk_ids;
  for (std::size_t start = 0; start < dataset.size(); start += kChunk) {
    const std::size_t end = std::min(dataset.size(), start + kChunk);
    std::vector<const Image*> imgs;
    std::vector<int> ids;
    for (std::size_t i = start; i < end; ++i) {
      imgs.push_back(&dataset[i].image);
      ids.push_back(dataset[i].label);
    }
    OemFeatures f = forward_oem(state.model, imgs, comp.oem);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      const auto row = f.weighted.row(r);
      oem_feats[ids[r]].emplace_back(row.begin(), row.end());
    }
    chunks.push_back(std::move(f));
    chunk_ids.push_back(std::move(ids));
  }
  state.banks.oem = MemoryBank::init(BankTag::PostOem, oem_feats, num_ids, momentum);

  if (!state.needs_fdm_bank()) return;
  std::map<int, std::vector<std::vector<real>>> fdm_feats;
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    Graph g(false);
    Var fd = state.model.fdm.forward(g, g.constant(chunks[c].weighted), g.constant(chunks[c].scores),
                                     state.banks.oem, chunk_ids[c]);
    const Tensor& v = g.value(fd);
    for (std::size_t r = 0; r < chunk_ids[c].size(); ++r) {
      const auto row = v.row(r);
      fdm_feats[chunk_ids[c][r]].emplace_back(row.begin(), row.end());
    }
  }
  state.banks.fdm = MemoryBank::init(BankTag::PostFdm, fdm_feats, num_ids, momentum);
}

LossBreakdown train_step(TrainState& state, std::span<const Sample* const> batch, double lr) {
  const TrainConfig& tc = state.config.train;
  const Components& comp = tc.components;
  if (batch.empty()) throw ContractError("train_step: empty batch");
  if (state.needs_oem_bank() && !state.banks.oem.initialized()) {
    throw StateError("train_step: post-OEM memory bank is not initialized");
  }
  if (state.needs_fdm_bank() && !state.banks.fdm.initialized()) {
    throw StateError("train_step: post-FDM memory bank is not initialized");
  }
  FedModel& model = state.model;
  const std::size_t n = batch.size();

  std::vector<Image> holistic, occluded;
  std::vector<OcclusionMask> masks;
  std::vector<int> ids;
  for (const Sample* s : batch) {
    Image x = common_augment(s->image, state.rng);
    if (comp.random_erasing) x = random_erase(x, state.rng);
    if (comp.npo) {
      AugmentedPair pair = augment_pair(x, state.patches, state.rng);
      occluded.push_back(std::move(pair.occluded));
      masks.push_back(pair.mask);
    }
    holistic.push_back(std::move(x));
    ids.push_back(s->label);
  }
  std::vector<const Image*> inputs;
  for (const Image& im : holistic) inputs.push_back(&im);
  for (const Image& im : occluded) inputs.push_back(&im);
  const std::size_t branches = comp.npo ? 2 : 1;

  Graph g;
  Var tokens = model.encoder.encode(g, inputs);
  Var cls_all = model.encoder.cls(g, tokens, inputs.size());
  Var parts_all = model.encoder.part_pool(g, tokens, inputs.size());

  std::vector<std::pair<LossTerm, Var>> terms;
  auto add_term = [&](std::string name, LossGroup group, Var v) {
    terms.push_back({LossTerm{std::move(name), group, static_cast<double>(g.value(v).item())}, v});
  };

  Var holistic_fp{}, holistic_fd{};
  const std::vector<OcclusionMask> visible(n, OcclusionMask::all_visible());
  for (std::size_t br = 0; br < branches; ++br) {
    const std::string tag = br == 0 ? "holistic" : "occluded";
    Var cls = gather_mean(g, cls_all, singleton_rows(br * n, n));
    Var parts = gather_mean(g, parts_all, singleton_rows(br * n * kParts, n * kParts));
    auto oem_out = model.oem.forward(g, parts, n, comp.oem);

    if (comp.oem && comp.mse) {
      add_term("mse." + tag, LossGroup::Mse, occlusion_mse(g, oem_out.scores, br == 0 ? visible : masks));
    }
    add_term("id.cls." + tag, LossGroup::Id, cross_entropy(g, model.cls_head(g, cls), ids));
    add_term("id.oem." + tag, LossGroup::Id, cross_entropy(g, model.oem_head(g, oem_out.weighted), ids));
    if (comp.triplet) {
      add_term("triplet.oem." + tag, LossGroup::Triplet, triplet_hard(g, oem_out.weighted, ids, tc.triplet_margin));
    }
    if (comp.contrastive) {
      add_term("c.oem." + tag, LossGroup::Contrastive,
               contrastive_loss(g, oem_out.weighted, state.banks.oem, ids, tc.temperature, tc.similarity));
    }
    Var fd{};
    if (comp.fdm) {
      fd = model.fdm.forward(g, oem_out.weighted, oem_out.scores, state.banks.oem, ids);
      add_term("id.fdm." + tag, LossGroup::Id, cross_entropy(g, model.fdm_head(g, fd), ids));
      if (comp.contrastive) {
        add_term("c.fdm." + tag, LossGroup::Contrastive, contrastive_loss(g, fd, state.banks.fdm, ids, tc.temperature, tc.similarity));
      }
    }
    if (br == 0) {
      holistic_fp = oem_out.weighted;
      holistic_fd = fd;
    }
  }

  LossBreakdown breakdown;
  for (const auto& [term, v] : terms) breakdown.terms.push_back(term);
  breakdown.total = compose_total(breakdown, tc.loss_norm);

  Var total{};
  for (const auto& [term, v] : terms) {
    Var weighted = scale(g, v, static_cast<real>(term_weight(breakdown, term.group, tc.loss_norm)));
    total = total.valid() ? add(g, total, weighted) : weighted;
  }

  auto params = model.parameters();
  for (Parameter* p : params) p->zero_grad();
  g.backward(total);
  state.optimizer.step(params, lr);

  // holistic features only; values come from this step's forward pass
  if (state.needs_oem_bank()) state.banks.oem.update(g.value(holistic_fp), ids);
  if (state.needs_fdm_bank()) state.banks.fdm.update(g.value(holistic_fd), ids);
  ++state.step;
  return breakdown;
}

TrainResult train(const std::vector<Sample>& dataset, const RunConfig& config, const StepCallback& on_step) {
  config.validate();
  if (dataset.empty()) throw ContractError("train: empty dataset");
  std::vector<int> labels;
  for (const auto& s : dataset) {
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= config.data.ids) {
      throw ContractError("train: label " + std::to_string(s.label) + " outside [0, ids)");
    }
    labels.push_back(s.label);
  }
  const IdentitySampler sampler(labels, config.train.ids_per_batch, config.train.samples_per_id);
  Rng sampler_rng(derive_seed(config.seed, "sampler"));
  std::vector<std::vector<std::vector<std::size_t>>> epochs;
  std::size_t total_steps = 0;
  for (std::size_t e = 0; e < config.train.epochs; ++e) {
    epochs.push_back(sampler.epoch(sampler_rng));
    total_steps += epochs.back().size();
  }

  TrainResult result{TrainState(config, config.seed), {}, {}};
  TrainState& state = result.state;
  init_banks(state, dataset);

  for (std::size_t e = 0; e < epochs.size(); ++e) {
    for (const auto& idx : epochs[e]) {
      std::vector<const Sample*> batch;
      for (std::size_t i : idx) batch.push_back(&dataset[i]);
      const double lr = cosine_lr(config.train.lr, state.step, total_steps);
      LossBreakdown b = train_step(state, batch, lr);
      MetricsRow row{e + 1,
                     state.step,
                     lr,
                     b.total,
                     b.group_sum(LossGroup::Mse),
                     b.group_sum(LossGroup::Id),
                     b.group_sum(LossGroup::Contrastive) + b.group_sum(LossGroup::Triplet)};
      if (on_step) on_step(row, b);
      result.rows.push_back(row);
      result.breakdowns.push_back(std::move(b));
    }
  }
  return result;
}

std::string format_metrics_row(const MetricsRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g,%.17g,%.17g", r.epoch, r.step, r.lr, r.total, r.mse,
                r.id, r.metric);
  return buf;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << kMetricsHeader << "\n";
  for (const auto& r : rows) f << format_metrics_row(r) << "\n";
  if (!f) throw IoError("write failed for " + path.string());
}

}  // namespace fed
