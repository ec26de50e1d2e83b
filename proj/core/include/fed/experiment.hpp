// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "fed/config.hpp"
#include "fed/npo.hpp"
#include "fed/retrieval.hpp"
#include "fed/synthetic.hpp"
#include "fed/training.hpp"

namespace fed {

/// Data for one run. Training uses identities 0..ids-1; the evaluation split
/// holds out the next `eval_ids` identities, with queries occluded by a patch
/// set that training never sees.
struct Experiment {
  std::vector<Sample> train;
  QueryGallery eval;
};

Experiment make_experiment(const RunConfig& config);

/// Evaluation with the model's inference path.
RankingResult evaluate_model(FedModel& model, const Experiment& experiment, const RunConfig& config);

struct RunOutcome {
  TrainResult training;
  RankingResult ranking;
  EvalMetrics metrics;
};

RunOutcome run_experiment(const RunConfig& config, const StepCallback& on_step = {});

struct ScoreRecord {
  std::size_t sample = 0;
  Orientation orientation = Orientation::Horizontal;
  OcclusionMask mask;
  std::array<double, kStripes> scores{};
};

struct ScoreSummary {
  std::vector<ScoreRecord> records;
  double mean_occluded = 0.0;  // stripes with mask 0
  double mean_visible = 0.0;   // stripes with mask 1
  std::size_t occluded = 0;
  std::size_t visible = 0;
};

/// Augments every sample once with `patches` and compares OEM scores with
/// the generated masks.
ScoreSummary inspect_scores(FedModel& model, const std::vector<Sample>& samples,
                            std::span<const OcclusionPatch> patches, std::uint64_t seed);

struct AblationRow {
  std::string name;
  Components components;
};

/// baseline, +RE, +NPO, +NPO+OEM, +NPO+FDM, full.
std::vector<AblationRow> ablation_rows();
RunConfig with_components(RunConfig config, const Components& components);

}  // namespace fed
