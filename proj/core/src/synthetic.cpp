// SPDX-License-Identifier: Apache-2.0
#include "fed/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "fed/errors.hpp"
#include "fed/npo.hpp"
#include "fed/rng.hpp"

namespace fed {

namespace {

// Base hues identities draw from; sharing them keeps identities confusable.
constexpr std::array<std::array<float, 3>, 10> kBaseColors{{
    {0.85f, 0.15f, 0.15f},
    {0.15f, 0.65f, 0.20f},
    {0.15f, 0.25f, 0.80f},
    {0.90f, 0.80f, 0.15f},
    {0.60f, 0.20f, 0.70f},
    {0.10f, 0.70f, 0.75f},
    {0.95f, 0.55f, 0.10f},
    {0.10f, 0.10f, 0.10f},
    {0.92f, 0.92f, 0.92f},
    {0.50f, 0.35f, 0.20f},
}};

std::array<float, 3> band_pixel(const Identity& ident, int band, std::size_t y, std::size_t x) {
  auto color = ident.palette[static_cast<std::size_t>(ident.band_colors[static_cast<std::size_t>(band)])];
  bool alt = false;
  switch (ident.textures[static_cast<std::size_t>(band)]) {
    case 1:
      alt = (y / 2) % 2 == 1;
      break;
    case 2:
      alt = (x / 2) % 2 == 1;
      break;
    case 3:
      alt = ((y / 3) + (x / 3)) % 2 == 1;
      break;
    default:
      break;
  }
  if (alt) {
    for (auto& v : color) v *= 0.55f;
  }
  return color;
}

Image render(const Identity& ident, std::size_t h, std::size_t w, Rng& rng) {
  Image img(h, w);
  const float brightness = static_cast<float>(rng.uniform(0.85, 1.15));
  const auto dx = rng.uniform_int(-2, 2);
  const auto dy = rng.uniform_int(-2, 2);

  std::array<float, 3> bg{};
  const double gray = rng.uniform(0.3, 0.7);
  for (auto& v : bg) v = static_cast<float>(gray + rng.uniform(-0.08, 0.08));
  const double grad = rng.uniform(-0.15, 0.15);
  for (std::size_t y = 0; y < h; ++y) {
    const float shade = static_cast<float>(grad * (static_cast<double>(y) / h - 0.5));
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        img.at(c, y, x) = bg[c] + shade + static_cast<float>(0.06 * rng.normal());
      }
    }
  }

  const double body_half = ident.body_fraction * static_cast<double>(w) / 2.0 +
                           rng.uniform(-1.0, 1.0);
  const double cx = static_cast<double>(w) / 2.0 + static_cast<double>(dx);
  const std::size_t band_h = h / 4;
  for (int band = 0; band < 4; ++band) {
    double half = body_half;
    if (band == 0) half *= 0.55;  // head
    for (std::size_t yy = 0; yy < band_h; ++yy) {
      const auto y = static_cast<std::int64_t>(band * band_h + yy) + dy;
      if (y < 0 || y >= static_cast<std::int64_t>(h)) continue;
      for (std::size_t x = 0; x < w; ++x) {
        const double off = static_cast<double>(x) + 0.5 - cx;
        if (std::abs(off) > half) continue;
        // legs split by a gap in the lowest band
        if (band == 3 && std::abs(off) < half * 0.25) continue;
        img.set_rgb(static_cast<std::size_t>(y), x,
                    band_pixel(ident, band, static_cast<std::size_t>(y), x));
      }
    }
  }

  for (float& v : img.pixels()) v = v * brightness + static_cast<float>(0.03 * rng.normal());
  img.clamp();
  return img;
}

}  // namespace

Identity make_identity(int id, std::uint64_t seed) {
  Identity ident;
  ident.id = id;
  // odd multiplier keeps the map id -> seed injective
  ident.appearance_seed = derive_seed(seed, "identity") + static_cast<std::uint64_t>(id) * 0x9e3779b97f4a7c15ULL;
  Rng rng(ident.appearance_seed);
  for (auto& color : ident.palette) {
    const auto& base = kBaseColors[static_cast<std::size_t>(rng.uniform_int(0, kBaseColors.size() - 1))];
    for (std::size_t c = 0; c < 3; ++c) {
      color[c] = std::clamp(base[c] + static_cast<float>(rng.uniform(-0.08, 0.08)), 0.0f, 1.0f);
    }
  }
  for (auto& t : ident.textures) t = static_cast<int>(rng.uniform_int(0, 3));
  for (auto& b : ident.band_colors) b = static_cast<int>(rng.uniform_int(0, 2));
  ident.body_fraction = static_cast<float>(rng.uniform(0.4, 0.65));
  return ident;
}

std::vector<Sample> generate_dataset(std::size_t ids, std::size_t per_id, std::size_t height,
                                     std::size_t width, std::uint64_t seed) {
  if (ids < 2 || per_id < 2) {
    throw ConfigError("generate_dataset needs ids >= 2 and per_id >= 2");
  }
  if (height % 4 != 0 || width % 4 != 0 || height < 8 || width < 8) {
    throw ConfigError("image extents " + std::to_string(height) + "x" + std::to_string(width) +
                      " must be multiples of 4 and at least 8");
  }
  std::vector<Sample> out;
  out.reserve(ids * per_id);
  for (std::size_t i = 0; i < ids; ++i) {
    const Identity ident = make_identity(static_cast<int>(i), seed);
    for (std::size_t j = 0; j < per_id; ++j) {
      Rng rng(derive_seed(ident.appearance_seed, "sample:" + std::to_string(j)));
      Sample s;
      s.image = render(ident, height, width, rng);
      s.label = static_cast<int>(i);
      s.camera = static_cast<int>(rng.uniform_int(0, 2));
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<OcclusionPatch> generate_patch_set(std::size_t count, std::uint64_t seed) {
  if (count == 0) throw ContractError("generate_patch_set needs count >= 1");
  std::vector<OcclusionPatch> out;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, "patch:" + std::to_string(i)));
    std::size_t ph, pw;
    if (i % 2 == 0) {
      pw = static_cast<std::size_t>(rng.uniform_int(4, 10));
      ph = static_cast<std::size_t>(std::lround(pw * rng.uniform(3.5, 6.0)));
      ph = std::max(ph, 3 * pw + 1);
    } else {
      ph = static_cast<std::size_t>(rng.uniform_int(4, 16));
      pw = static_cast<std::size_t>(std::lround(ph / rng.uniform(0.2, 1.5)));
      pw = std::max<std::size_t>(pw, (ph + 2) / 3);
    }
    std::array<float, 3> a{}, b{};
    for (std::size_t c = 0; c < 3; ++c) {
      a[c] = static_cast<float>(rng.uniform());
      b[c] = static_cast<float>(rng.uniform());
    }
    static constexpr const char* kKinds[] = {"solid", "gradient", "grid", "blocks"};
    const auto kind = static_cast<std::size_t>(rng.uniform_int(0, 3));
    Image img(ph, pw);
    for (std::size_t y = 0; y < ph; ++y) {
      for (std::size_t x = 0; x < pw; ++x) {
        float t = 0.0f;
        switch (kind) {
          case 1:
            t = static_cast<float>(y) / static_cast<float>(std::max<std::size_t>(ph - 1, 1));
            break;
          case 2:
            t = (y % 4 == 0 || x % 4 == 0) ? 1.0f : 0.0f;
            break;
          case 3:
            t = ((y / 5) * 7 + (x / 5) * 3) % 2 == 0 ? 0.0f : 1.0f;
            break;
          default:
            break;
        }
        for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = a[c] * (1 - t) + b[c] * t;
      }
    }
    out.push_back({std::move(img), std::string("synthetic:") + kKinds[kind]});
  }
  return out;
}

QueryGallery split_query_gallery(const std::vector<Sample>& samples, std::size_t holdout_ids,
                                 bool occlude_queries, std::span<const OcclusionPatch> patches,
                                 std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_id;
  for (std::size_t i = 0; i < samples.size(); ++i) by_id[samples[i].label].push_back(i);
  if (holdout_ids > by_id.size()) {
    throw ContractError("holdout of " + std::to_string(holdout_ids) + " identities exceeds the " +
                        std::to_string(by_id.size()) + " available");
  }
  QueryGallery out;
  Rng rng(derive_seed(seed, "query-occlusion"));
  auto it = by_id.end();
  std::advance(it, -static_cast<std::ptrdiff_t>(holdout_ids));
  for (; it != by_id.end(); ++it) {
    const auto& idx = it->second;
    if (idx.size() < 2) {
      throw ContractError("identity " + std::to_string(it->first) +
                          " has fewer than 2 samples; cannot split query/gallery");
    }
    const std::size_t nq = idx.size() / 2;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      Sample s = samples[idx[j]];
      if (j < nq) {
        if (occlude_queries) s.image = augment_pair(s.image, patches, rng).occluded;
        out.query.push_back(std::move(s));
        out.query_source.push_back(idx[j]);
      } else {
        out.gallery.push_back(std::move(s));
        out.gallery_source.push_back(idx[j]);
      }
    }
  }
  return out;
}

std::vector<Sample> take_identities(const std::vector<Sample>& samples, std::size_t ids) {
  std::vector<Sample> out;
  for (const auto& s : samples) {
    if (s.label >= 0 && static_cast<std::size_t>(s.label) < ids) out.push_back(s);
  }
  return out;
}

}  // namespace fed
