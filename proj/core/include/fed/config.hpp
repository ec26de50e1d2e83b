// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "fed/encoder.hpp"
#include "fed/memory.hpp"

namespace fed {

enum class LossNorm { Sum, Mean };

/// Which parts of the pipeline a run uses; the ablation rows are presets.
struct Components {
  bool npo = true;
  bool oem = true;
  bool fdm = true;
  bool contrastive = true;
  bool random_erasing = false;
  bool triplet = false;
  bool mse = true;
};

struct DataConfig {
  std::size_t ids = 20;
  std::size_t eval_ids = 10;
  std::size_t per_id = 16;
  std::size_t eval_per_id = 20;
  std::size_t patches = 30;
};

struct TrainConfig {
  std::size_t ids_per_batch = 4;
  std::size_t samples_per_id = 4;
  double lr = 0.008;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t epochs = 20;
  float memory_momentum = 0.2f;
  float temperature = 0.05f;
  Similarity similarity = Similarity::Cosine;
  float triplet_margin = 0.3f;
  /// Global gradient-norm ceiling applied before the SGD update; 0 disables.
  double grad_clip = 5.0;
  LossNorm loss_norm = LossNorm::Sum;
  Components components;
};

struct RunConfig {
  std::uint64_t seed = 1;
  DataConfig data;
  EncoderConfig encoder;
  std::size_t fdm_heads = 8;
  std::size_t k = 8;
  TrainConfig train;
  bool cross_camera_only = false;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
};

/// Parses `key = value` lines. Blank lines and `#` comments are ignored;
/// unknown keys and malformed values raise ConfigError prefixed "line N:".
RunConfig parse_config(std::string_view text);
/// ConfigError naming the path when the file cannot be read.
RunConfig load_config(const std::filesystem::path& path);
/// Canonical text form; parse_config(format_config(c)) reproduces c.
std::string format_config(const RunConfig& config);

}  // namespace fed
