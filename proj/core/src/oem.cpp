// SPDX-License-Identifier: Apache-2.0
#include "fed/oem.hpp"

#include <string>

#include "fed/encoder.hpp"
#include "fed/errors.hpp"
#include "fed/ops.hpp"

namespace fed {

OcclusionErasing::OcclusionErasing(std::size_t channels, Rng& rng) : channels_(channels) {
  if (channels == 0 || channels % 4 != 0) {
    throw ConfigError("OEM channels " + std::to_string(channels) + " must be divisible by 4");
  }
  for (std::size_t i = 0; i < kParts; ++i) {
    const std::string p = "oem." + std::to_string(i);
    subs_.push_back(Submodule{
        Linear(p + ".compress", channels, channels / 4, false, rng),
        LayerNorm(p + ".norm", channels / 4),
        Linear(p + ".regress", channels / 4, 1, false, rng),
    });
  }
}

OcclusionErasing::Output OcclusionErasing::forward(Graph& g, Var parts, std::size_t batch,
                                                   bool enabled) {
  const Tensor& pv = g.value(parts);
  if (pv.cols() != channels_ || pv.rows() != batch * kParts) {
    throw DimensionError("OEM expects [" + std::to_string(batch * kParts) + "x" +
                         std::to_string(channels_) + "] parts, got " + shape_string(pv.shape()));
  }
  std::vector<Var> weighted, scores;
  for (std::size_t i = 0; i < kParts; ++i) {
    std::vector<std::vector<std::size_t>> rows;
    for (std::size_t b = 0; b < batch; ++b) rows.push_back({b * kParts + i});
    Var f = gather_mean(g, parts, rows);
    if (!enabled) {
      weighted.push_back(f);
      scores.push_back(g.constant(Tensor::matrix(batch, 1, 1.0f)));
      continue;
    }
    Submodule& sub = subs_[i];
    Var s = sigmoid(g, sub.regress(g, sub.norm(g, sub.compress(g, f))));
    weighted.push_back(scale_rows(g, f, s));
    scores.push_back(s);
  }
  return {concat_cols(g, weighted), concat_cols(g, scores)};
}

void OcclusionErasing::collect(std::vector<Parameter*>& out) {
  for (Submodule& s : subs_) {
    s.compress.collect(out);
    s.norm.collect(out);
    s.regress.collect(out);
  }
}

Var occlusion_mse(Graph& g, Var scores, const std::vector<OcclusionMask>& masks) {
  const Tensor& sv = g.value(scores);
  if (sv.cols() != kParts || sv.rows() != masks.size()) {
    throw DimensionError("occlusion_mse: scores " + shape_string(sv.shape()) + " vs " +
                         std::to_string(masks.size()) + " masks");
  }
  Tensor target = Tensor::matrix(masks.size(), kParts);
  for (std::size_t b = 0; b < masks.size(); ++b) {
    for (std::size_t i = 0; i < kParts; ++i) target.at(b, i) = static_cast<real>(masks[b].stripes[i]);
  }
  return mse(g, scores, target);
}

}  // namespace fed
