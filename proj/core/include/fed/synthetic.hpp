// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fed/image.hpp"

namespace fed {

/// Appearance description of one synthetic pedestrian.
struct Identity {
  int id = 0;
  std::uint64_t appearance_seed = 0;
  std::array<std::array<float, 3>, 3> palette{};
  /// Texture code per horizontal band, top to bottom: 0 solid, 1 horizontal
  /// stripes, 2 vertical stripes, 3 checker.
  std::array<int, 4> textures{};
  /// Palette index used by each band.
  std::array<int, 4> band_colors{};
  float body_fraction = 0.5f;
};

struct Sample {
  Image image;
  int label = 0;
  int camera = 0;
};

struct OcclusionPatch {
  Image image;
  std::string source;
};

Identity make_identity(int id, std::uint64_t seed);

/// Renders `per_id` jittered images of each of `ids` identities. Labels are
/// 0..ids-1 in order, samples grouped by identity. Pure in (arguments, seed).
std::vector<Sample> generate_dataset(std::size_t ids, std::size_t per_id, std::size_t height,
                                     std::size_t width, std::uint64_t seed);

/// Non-pedestrian occluders. Even indices are tall (height/width > 3), odd
/// indices wide, so any count >= 2 covers both orientations.
std::vector<OcclusionPatch> generate_patch_set(std::size_t count, std::uint64_t seed);

struct QueryGallery {
  std::vector<Sample> query;
  std::vector<Sample> gallery;
  /// Index into the input samples each entry came from.
  std::vector<std::size_t> query_source;
  std::vector<std::size_t> gallery_source;
};

/// Takes the `holdout_ids` highest labels; for each, the first half of its
/// samples become queries and the rest gallery. With `occlude_queries` every
/// query image goes through NPO augmentation drawn from `patches`.
QueryGallery split_query_gallery(const std::vector<Sample>& samples, std::size_t holdout_ids,
                                 bool occlude_queries, std::span<const OcclusionPatch> patches,
                                 std::uint64_t seed);

/// Samples whose label is below `ids` (the training identities).
std::vector<Sample> take_identities(const std::vector<Sample>& samples, std::size_t ids);

}  // namespace fed
