// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "fed/graph.hpp"
#include "fed/layers.hpp"
#include "fed/memory.hpp"
#include "fed/rng.hpp"

namespace fed {

struct FdmConfig {
  /// Flattened feature width d = N * c.
  std::size_t dim = 256;
  std::size_t heads = 8;
  /// Number of memory centers attended to.
  std::size_t k = 8;
  /// Hidden width of both feed-forward networks; 0 means 2 * dim.
  std::size_t hidden = 0;

  std::size_t hidden_width() const { return hidden == 0 ? 2 * dim : hidden; }
  void validate() const;
};

/// Feature diffusion: cross attention from a pedestrian feature to the K
/// nearest memory centers of other identities, followed by
///   f_d' = FFN2(s * FFN1(f_d) + f')
/// where s broadcasts each part's occlusion score over that part's channels.
/// Training-only; nothing on the inference path reads these parameters.
class FeatureDiffusion {
 public:
  /// Post-norm feed-forward network: fc2(relu(fc1(LN(x)))).
  struct FeedForward {
    LayerNorm norm;
    Linear fc1;
    Linear fc2;
    Var operator()(Graph& g, Var x);
  };

  FeatureDiffusion(const FdmConfig& config, Rng& rng);

  const FdmConfig& config() const { return config_; }

  /// q_feat: [B x d]; centers: [B*K x d] (K rows per query, constant).
  /// Returns f_d [B x d]. `weights` receives [B][heads][1][K] softmax weights.
  Var cross_attention(Graph& g, Var q_feat, const Tensor& centers, std::size_t batch,
                      std::vector<real>* weights = nullptr);

  /// FFN1 applied to the attention output with the query residual: FFN1(f_d + f').
  Var ffn1(Graph& g, Var attended, Var f_prime);
  Var ffn2(Graph& g, Var x) { return ffn2_(g, x); }

  /// Full module. Searches `bank` (post-OEM) with each row's values, excluding
  /// that row's identity, then diffuses. scores: [B x 4].
  Var forward(Graph& g, Var f_prime, Var scores, const MemoryBank& bank, const std::vector<int>& ids,
              std::vector<real>* weights = nullptr);

  /// Center rows selected for each query, stacked [B*K x d].
  Tensor select_centers(const Tensor& f_prime, const MemoryBank& bank, const std::vector<int>& ids) const;

  void collect(std::vector<Parameter*>& out);

 private:
  FdmConfig config_;
  Linear query_;  // W1
  Linear key_;    // W2
  Linear value_;  // W3
  FeedForward ffn1_;
  FeedForward ffn2_;
};

}  // namespace fed
