// SPDX-License-Identifier: Apache-2.0
#include "fed/experiment.hpp"

#include <algorithm>

#include "fed/rng.hpp"

namespace fed {

Experiment make_experiment(const RunConfig& config) {
  config.validate();
  const DataConfig& d = config.data;
  const std::uint64_t data_seed = derive_seed(config.seed, "data");
  const std::size_t h = config.encoder.height;
  const std::size_t w = config.encoder.width;
  Experiment ex;
  // samples depend only on (seed, identity, index), so identity i looks the
  // same in both calls
  ex.train = generate_dataset(d.ids, d.per_id, h, w, data_seed);
  const auto pool = generate_dataset(d.ids + d.eval_ids, d.eval_per_id, h, w, data_seed);
  const auto eval_patches = generate_patch_set(d.patches, derive_seed(config.seed, "eval-patches"));
  ex.eval = split_query_gallery(pool, d.eval_ids, true, eval_patches, derive_seed(config.seed, "split"));
  return ex;
}

RankingResult evaluate_model(FedModel& model, const Experiment& experiment, const RunConfig& config) {
  const bool oem = config.train.components.oem;
  const EmbeddingIndex query = embed(experiment.eval.query, model, oem);
  const EmbeddingIndex gallery = embed(experiment.eval.gallery, model, oem);
  return evaluate(query, gallery, config.cross_camera_only);
}

RunOutcome run_experiment(const RunConfig& config, const StepCallback& on_step) {
  const Experiment ex = make_experiment(config);
  TrainResult tr = train(ex.train, config, on_step);
  RankingResult ranking = evaluate_model(tr.state.model, ex, config);
  const EvalMetrics metrics = summarize(ranking);
  return {std::move(tr), std::move(ranking), metrics};
}

ScoreSummary inspect_scores(FedModel& model, const std::vector<Sample>& samples,
                            std::span<const OcclusionPatch> patches, std::uint64_t seed) {
  Rng rng(seed);
  ScoreSummary out;
  constexpr std::size_t kChunk = 32;
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    const std::size_t end = std::min(samples.size(), start + kChunk);
    std::vector<AugmentedPair> pairs;
    std::vector<const Image*> imgs;
    for (std::size_t i = start; i < end; ++i) pairs.push_back(augment_pair(samples[i].image, patches, rng));
    for (const auto& p : pairs) imgs.push_back(&p.occluded);
    const Tensor scores = model.occlusion_scores(imgs);
    for (std::size_t r = 0; r < pairs.size(); ++r) {
      ScoreRecord rec{start + r, pairs[r].orientation, pairs[r].mask, {}};
      for (std::size_t s = 0; s < kStripes; ++s) {
        rec.scores[s] = scores.at(r, s);
        if (rec.mask.stripes[s] == 0) {
          out.mean_occluded += rec.scores[s];
          ++out.occluded;
        } else {
          out.mean_visible += rec.scores[s];
          ++out.visible;
        }
      }
      out.records.push_back(rec);
    }
  }
  if (out.occluded > 0) out.mean_occluded /= static_cast<double>(out.occluded);
  if (out.visible > 0) out.mean_visible /= static_cast<double>(out.visible);
  return out;
}

std::vector<AblationRow> ablation_rows() {
  Components baseline;
  baseline.npo = false;
  baseline.oem = false;
  baseline.fdm = false;
  baseline.contrastive = false;
  baseline.triplet = true;

  Components re = baseline;
  re.random_erasing = true;

  Components npo;
  npo.oem = false;
  npo.fdm = false;

  Components npo_oem;
  npo_oem.fdm = false;

  Components npo_fdm;
  npo_fdm.oem = false;

  return {{"baseline", baseline}, {"+RE", re},          {"+NPO", npo},
          {"+NPO+OEM", npo_oem},  {"+NPO+FDM", npo_fdm}, {"full", Components{}}};
}

RunConfig with_components(RunConfig config, const Components& components) {
  const bool mse = config.train.components.mse;
  config.train.components = components;
  config.train.components.mse = mse;
  return config;
}

}  // namespace fed
