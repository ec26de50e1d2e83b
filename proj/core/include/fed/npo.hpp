// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>

#include "fed/image.hpp"
#include "fed/rng.hpp"
#include "fed/synthetic.hpp"

namespace fed {

inline constexpr std::size_t kStripes = 4;

enum class Orientation { Vertical, Horizontal };
enum class Corner { TopLeft, TopRight, BottomLeft, BottomRight };

std::string to_string(Orientation o);

/// Per-stripe labels, top to bottom: 1 = visible human part, 0 = occluded.
struct OcclusionMask {
  std::array<int, kStripes> stripes{1, 1, 1, 1};

  static OcclusionMask all_visible() { return {}; }
  bool operator==(const OcclusionMask&) const = default;
};

/// Vertical iff height/width > 3.
Orientation classify_patch(const OcclusionPatch& patch);

/// Size and placement of one paste. `extent` is the pasted height for
/// horizontal occlusions and the pasted width for vertical ones.
struct OcclusionDraw {
  std::size_t extent = 0;
  Corner corner = Corner::TopLeft;
};

/// Draws extent in [H/4, H/2] (horizontal) or [W/4, W/2] (vertical) and a
/// uniformly chosen corner.
OcclusionDraw draw_occlusion(std::size_t height, std::size_t width, Orientation orientation,
                             Rng& rng);

/// Region of the image overwritten by a paste.
struct PasteRect {
  std::size_t top = 0, left = 0, height = 0, width = 0;
  bool contains(std::size_t y, std::size_t x) const {
    return y >= top && y < top + height && x >= left && x < left + width;
  }
};

struct Occlusion {
  Image image;           // x'
  Image resized_patch;   // exact pixels written into `rect`
  PasteRect rect;
  Orientation orientation = Orientation::Horizontal;
  Corner corner = Corner::TopLeft;
};

/// Jitters the patch (random crop, color jitter), resizes it by orientation
/// and pastes it flush into the drawn corner. `x` is left untouched.
Occlusion occlude(const Image& x, const OcclusionPatch& patch, const OcclusionDraw& draw, Rng& rng);
Occlusion occlude(const Image& x, const OcclusionPatch& patch, Rng& rng);

/// Fine-to-coarse mask from d = |x - x'|. A pixel counts as covered when any
/// channel differs by more than `eps`; a stripe is occluded when more than
/// 3/4 of its pixels are covered. Vertical occlusions yield all ones.
OcclusionMask generate_mask(const Image& x, const Image& occluded, Orientation orientation,
                            float eps = 0.0f);

struct AugmentedPair {
  Image original;
  Image occluded;
  OcclusionMask mask;
  Orientation orientation = Orientation::Horizontal;
};

AugmentedPair augment_pair(const Image& x, std::span<const OcclusionPatch> patches, Rng& rng);

/// Reduced "common augmentation": brightness scaling in [0.9, 1.1] and a
/// translation of at most 2 pixels with edge replication.
Image common_augment(const Image& x, Rng& rng);

/// Random erasing baseline: with probability `p` a rectangle covering 2-40%
/// of the image (aspect 0.3-3.3) is filled with uniform noise.
Image random_erase(const Image& x, Rng& rng, double p = 0.5);

}  // namespace fed
