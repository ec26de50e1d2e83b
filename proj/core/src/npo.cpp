// SPDX-License-Identifier: Apache-2.0
#include "fed/npo.hpp"

#include <algorithm>
#include <cmath>

#include "fed/errors.hpp"

namespace fed {

std::string to_string(Orientation o) {
  return o == Orientation::Vertical ? "vertical" : "horizontal";
}

Orientation classify_patch(const OcclusionPatch& patch) {
  const auto h = patch.image.height();
  const auto w = patch.image.width();
  // integer form of h / w > 3
  return h > 3 * w ? Orientation::Vertical : Orientation::Horizontal;
}

OcclusionDraw draw_occlusion(std::size_t height, std::size_t width, Orientation orientation,
                             Rng& rng) {
  const std::size_t span = orientation == Orientation::Horizontal ? height : width;
  OcclusionDraw d;
  d.extent = static_cast<std::size_t>(
      rng.uniform_int(static_cast<std::int64_t>(span / 4), static_cast<std::int64_t>(span / 2)));
  d.corner = static_cast<Corner>(rng.uniform_int(0, 3));
  return d;
}

namespace {

Image jitter_patch(const Image& src, Rng& rng) {
  // random crop keeping 80-100% of each side
  const auto ch = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(src.height() * rng.uniform(0.8, 1.0))));
  const auto cw = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(src.width() * rng.uniform(0.8, 1.0))));
  const auto oy = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(src.height() - ch)));
  const auto ox = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(src.width() - cw)));
  const double gain = rng.uniform(0.8, 1.2);
  std::array<double, 3> shift{};
  for (auto& s : shift) s = rng.uniform(-0.05, 0.05);
  Image out(ch, cw);
  for (std::size_t c = 0; c < Image::kChannels; ++c) {
    for (std::size_t y = 0; y < ch; ++y) {
      for (std::size_t x = 0; x < cw; ++x) {
        out.at(c, y, x) = static_cast<float>(src.at(c, oy + y, ox + x) * gain + shift[c]);
      }
    }
  }
  out.clamp();
  return out;
}

}  // namespace

Occlusion occlude(const Image& x, const OcclusionPatch& patch, const OcclusionDraw& draw, Rng& rng) {
  const std::size_t h = x.height(), w = x.width();
  if (patch.image.empty()) throw ContractError("occlude: empty patch");
  if (h < 8 || w < 8) throw DimensionError("occlude: image must be at least 8x8");
  Occlusion out;
  out.orientation = classify_patch(patch);
  out.corner = draw.corner;
  const std::size_t span = out.orientation == Orientation::Horizontal ? h : w;
  if (draw.extent < span / 4 || draw.extent > span / 2) {
    throw ContractError("occlude: extent " + std::to_string(draw.extent) + " outside [" +
                        std::to_string(span / 4) + ", " + std::to_string(span / 2) + "]");
  }
  if (out.orientation == Orientation::Horizontal) {
    out.rect.height = draw.extent;
    out.rect.width = w;
  } else {
    out.rect.height = h;
    out.rect.width = draw.extent;
  }
  const bool bottom = draw.corner == Corner::BottomLeft || draw.corner == Corner::BottomRight;
  const bool right = draw.corner == Corner::TopRight || draw.corner == Corner::BottomRight;
  out.rect.top = bottom ? h - out.rect.height : 0;
  out.rect.left = right ? w - out.rect.width : 0;

  out.resized_patch = resize_bilinear(jitter_patch(patch.image, rng), out.rect.height, out.rect.width);
  out.image = x;
  for (std::size_t c = 0; c < Image::kChannels; ++c) {
    for (std::size_t y = 0; y < out.rect.height; ++y) {
      for (std::size_t xx = 0; xx < out.rect.width; ++xx) {
        out.image.at(c, out.rect.top + y, out.rect.left + xx) = out.resized_patch.at(c, y, xx);
      }
    }
  }
  return out;
}

Occlusion occlude(const Image& x, const OcclusionPatch& patch, Rng& rng) {
  const auto draw = draw_occlusion(x.height(), x.width(), classify_patch(patch), rng);
  return occlude(x, patch, draw, rng);
}

OcclusionMask generate_mask(const Image& x, const Image& occluded, Orientation orientation,
                            float eps) {
  if (x.height() != occluded.height() || x.width() != occluded.width()) {
    throw ContractError("generate_mask: image shapes differ");
  }
  if (x.height() % kStripes != 0) {
    throw ContractError("generate_mask: height " + std::to_string(x.height()) +
                        " is not divisible into 4 stripes");
  }
  OcclusionMask mask;
  if (orientation == Orientation::Vertical) return mask;
  const std::size_t stripe_h = x.height() / kStripes;
  const std::size_t w = x.width();
  for (std::size_t s = 0; s < kStripes; ++s) {
    std::size_t covered = 0;
    for (std::size_t y = s * stripe_h; y < (s + 1) * stripe_h; ++y) {
      for (std::size_t xx = 0; xx < w; ++xx) {
        bool diff = false;
        for (std::size_t c = 0; c < Image::kChannels; ++c) {
          diff = diff || std::abs(x.at(c, y, xx) - occluded.at(c, y, xx)) > eps;
        }
        covered += diff ? 1 : 0;
      }
    }
    // covered / total > 3/4, in integers
    mask.stripes[s] = 4 * covered > 3 * stripe_h * w ? 0 : 1;
  }
  return mask;
}

AugmentedPair augment_pair(const Image& x, std::span<const OcclusionPatch> patches, Rng& rng) {
  if (patches.empty()) throw ConfigError("augment_pair: the occlusion set is empty");
  const auto& patch = patches[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(patches.size()) - 1))];
  Occlusion occ = occlude(x, patch, rng);
  AugmentedPair pair;
  pair.mask = generate_mask(x, occ.image, occ.orientation);
  pair.orientation = occ.orientation;
  pair.original = x;
  pair.occluded = std::move(occ.image);
  return pair;
}

Image common_augment(const Image& x, Rng& rng) {
  const double gain = rng.uniform(0.9, 1.1);
  const auto dx = rng.uniform_int(-2, 2);
  const auto dy = rng.uniform_int(-2, 2);
  const auto h = static_cast<std::int64_t>(x.height());
  const auto w = static_cast<std::int64_t>(x.width());
  Image out(x.height(), x.width());
  for (std::size_t c = 0; c < Image::kChannels; ++c) {
    for (std::int64_t y = 0; y < h; ++y) {
      const auto sy = static_cast<std::size_t>(std::clamp<std::int64_t>(y - dy, 0, h - 1));
      for (std::int64_t xx = 0; xx < w; ++xx) {
        const auto sx = static_cast<std::size_t>(std::clamp<std::int64_t>(xx - dx, 0, w - 1));
        out.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(xx)) =
            static_cast<float>(x.at(c, sy, sx) * gain);
      }
    }
  }
  out.clamp();
  return out;
}

Image random_erase(const Image& x, Rng& rng, double p) {
  Image out = x;
  if (!rng.bernoulli(p)) return out;
  const double area = static_cast<double>(x.height() * x.width());
  for (int attempt = 0; attempt < 100; ++attempt) {
    const double target = area * rng.uniform(0.02, 0.4);
    const double aspect = std::exp(rng.uniform(std::log(0.3), std::log(1 / 0.3)));
    const auto eh = static_cast<std::size_t>(std::lround(std::sqrt(target * aspect)));
    const auto ew = static_cast<std::size_t>(std::lround(std::sqrt(target / aspect)));
    if (eh == 0 || ew == 0 || eh >= x.height() || ew >= x.width()) continue;
    const auto top = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(x.height() - eh)));
    const auto left = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(x.width() - ew)));
    for (std::size_t c = 0; c < Image::kChannels; ++c) {
      for (std::size_t y = top; y < top + eh; ++y) {
        for (std::size_t xx = left; xx < left + ew; ++xx) out.at(c, y, xx) = static_cast<float>(rng.uniform());
      }
    }
    return out;
  }
  return out;
}

}  // namespace fed
