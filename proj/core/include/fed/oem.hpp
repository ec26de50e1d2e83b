// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "fed/graph.hpp"
#include "fed/layers.hpp"
#include "fed/npo.hpp"
#include "fed/rng.hpp"

namespace fed {

/// Occlusion erasing: one independent compress -> norm -> regress -> sigmoid
/// head per body part; each part feature is rescaled by its score.
class OcclusionErasing {
 public:
  struct Submodule {
    Linear compress;  // c -> c/4, no bias
    LayerNorm norm;   // over c/4
    Linear regress;   // c/4 -> 1, no bias
  };

  struct Output {
    /// [B x 4c] flattened weighted parts f', part i in columns [i*c, (i+1)*c).
    Var weighted;
    /// [B x 4] occlusion scores in (0, 1).
    Var scores;
  };

  OcclusionErasing(std::size_t channels, Rng& rng);

  /// `parts` is [B*4 x c] as produced by Encoder::part_pool. With `enabled`
  /// false the module is bypassed: scores are constant ones and f' = f.
  Output forward(Graph& g, Var parts, std::size_t batch, bool enabled = true);

  std::size_t channels() const { return channels_; }
  Submodule& submodule(std::size_t i) { return subs_.at(i); }
  void collect(std::vector<Parameter*>& out);

 private:
  std::size_t channels_;
  std::vector<Submodule> subs_;
};

/// (1 / (4B)) * sum over batch and parts of (s - mask)^2.
Var occlusion_mse(Graph& g, Var scores, const std::vector<OcclusionMask>& masks);

}  // namespace fed
