// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fed/graph.hpp"
#include "fed/image.hpp"
#include "fed/layers.hpp"
#include "fed/rng.hpp"

namespace fed {

inline constexpr std::size_t kParts = 4;

struct EncoderConfig {
  std::size_t height = 64;
  std::size_t width = 32;
  std::size_t patch = 8;
  std::size_t depth = 4;
  std::size_t channels = 64;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 4;

  std::size_t grid_rows() const { return height / patch; }
  std::size_t grid_cols() const { return width / patch; }
  /// Grid token count n (excludes the cls token).
  std::size_t tokens() const { return grid_rows() * grid_cols(); }
  std::size_t patch_dim() const { return Image::kChannels * patch * patch; }

  /// Throws ConfigError when the extents do not divide as required.
  void validate() const;

  /// 256x128 input, patch 16 (n = 128), c = 768, 12 blocks of 12 heads.
  static EncoderConfig paper_scale();
};

/// ViT-style encoder: linear patch embedding, learned position embeddings, a
/// prepended cls token, pre-norm transformer blocks and a final norm.
///
/// A batch of B images produces B consecutive blocks of (n + 1) token rows;
/// row 0 of each block is the cls token and the rest follow the patch grid
/// in row-major order.
class Encoder {
 public:
  Encoder(const EncoderConfig& config, Rng& rng);

  const EncoderConfig& config() const { return config_; }

  /// Returns [B*(n+1) x c]. When `attention_weights` is given it receives one
  /// entry per block, laid out as described on attention().
  Var encode(Graph& g, std::span<const Image* const> images,
             std::vector<std::vector<real>>* attention_weights = nullptr);

  /// [B x c] cls rows of encode()'s output.
  Var cls(Graph& g, Var tokens, std::size_t batch) const;
  /// [B*4 x c]: row b*4+i is the mean of the grid tokens in horizontal band i
  /// of image b.
  Var part_pool(Graph& g, Var tokens, std::size_t batch) const;

  void collect(std::vector<Parameter*>& out);

 private:
  struct Block {
    LayerNorm norm1;
    Linear qkv;
    Linear proj;
    LayerNorm norm2;
    Linear fc1;
    Linear fc2;
  };

  Tensor patchify(std::span<const Image* const> images) const;

  EncoderConfig config_;
  Linear patch_embed_;
  Parameter cls_token_;
  Parameter pos_embed_;
  std::vector<Block> blocks_;
  LayerNorm norm_;
};

}  // namespace fed
