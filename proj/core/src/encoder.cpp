// SPDX-License-Identifier: Apache-2.0
#include "fed/encoder.hpp"

#include <string>

#include "fed/errors.hpp"
#include "fed/ops.hpp"

namespace fed {

void EncoderConfig::validate() const {
  if (patch == 0 || height % patch != 0 || width % patch != 0) {
    throw ConfigError("image " + std::to_string(height) + "x" + std::to_string(width) +
                      " is not divisible by patch size " + std::to_string(patch));
  }
  if (grid_rows() % kParts != 0) {
    throw ConfigError("patch grid has " + std::to_string(grid_rows()) +
                      " rows, not divisible into 4 part bands");
  }
  if (heads == 0 || channels % heads != 0) {
    throw ConfigError("channels " + std::to_string(channels) + " not divisible by heads " +
                      std::to_string(heads));
  }
  if (channels % kParts != 0) {
    throw ConfigError("channels " + std::to_string(channels) + " must be divisible by 4");
  }
  if (depth == 0) throw ConfigError("encoder depth must be positive");
}

EncoderConfig EncoderConfig::paper_scale() {
  EncoderConfig c;
  c.height = 256;
  c.width = 128;
  c.patch = 16;
  c.depth = 12;
  c.channels = 768;
  c.heads = 12;
  return c;
}

Encoder::Encoder(const EncoderConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const std::size_t c = config_.channels;
  patch_embed_ = Linear("encoder.patch_embed", config_.patch_dim(), c, true, rng);
  cls_token_ = Parameter("encoder.cls_token", uniform_tensor({1, c}, 0.02f, rng));
  pos_embed_ = Parameter("encoder.pos_embed", uniform_tensor({config_.tokens() + 1, c}, 0.02f, rng));
  for (std::size_t i = 0; i < config_.depth; ++i) {
    const std::string p = "encoder.blocks." + std::to_string(i);
    blocks_.push_back(Block{
        LayerNorm(p + ".norm1", c),
        Linear(p + ".attn.qkv", c, 3 * c, true, rng),
        Linear(p + ".attn.proj", c, c, true, rng),
        LayerNorm(p + ".norm2", c),
        Linear(p + ".mlp.fc1", c, config_.mlp_ratio * c, true, rng),
        Linear(p + ".mlp.fc2", config_.mlp_ratio * c, c, true, rng),
    });
  }
  norm_ = LayerNorm("encoder.norm", c);
}

Tensor Encoder::patchify(std::span<const Image* const> images) const {
  const std::size_t n = config_.tokens(), pd = config_.patch_dim(), p = config_.patch;
  const std::size_t gw = config_.grid_cols();
  Tensor out = Tensor::matrix(images.size() * n, pd);
  for (std::size_t b = 0; b < images.size(); ++b) {
    const Image& img = *images[b];
    if (img.height() != config_.height || img.width() != config_.width) {
      throw ConfigError("encoder expects " + std::to_string(config_.height) + "x" +
                        std::to_string(config_.width) + " images, got " +
                        std::to_string(img.height()) + "x" + std::to_string(img.width()));
    }
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t gy = t / gw, gx = t % gw;
      real* row = out.data() + (b * n + t) * pd;
      std::size_t k = 0;
      for (std::size_t ch = 0; ch < Image::kChannels; ++ch) {
        for (std::size_t y = 0; y < p; ++y) {
          for (std::size_t x = 0; x < p; ++x) row[k++] = img.at(ch, gy * p + y, gx * p + x);
        }
      }
    }
  }
  return out;
}

Var Encoder::encode(Graph& g, std::span<const Image* const> images,
                    std::vector<std::vector<real>>* attention_weights) {
  if (images.empty()) throw ContractError("encode: empty batch");
  const std::size_t batch = images.size(), n = config_.tokens(), t = n + 1;
  const std::size_t c = config_.channels;

  Var patches = patch_embed_(g, g.constant(patchify(images)));
  // prepend the shared cls row to every image's block
  Var stacked = concat_rows(g, {g.param(cls_token_), patches});
  std::vector<std::vector<std::size_t>> order;
  order.reserve(batch * t);
  for (std::size_t b = 0; b < batch; ++b) {
    order.push_back({0});
    for (std::size_t j = 0; j < n; ++j) order.push_back({1 + b * n + j});
  }
  Var x = add_tiled(g, gather_mean(g, stacked, order), g.param(pos_embed_));

  if (attention_weights) attention_weights->clear();
  for (Block& blk : blocks_) {
    Var qkv = blk.qkv(g, blk.norm1(g, x));
    Var q = slice_cols(g, qkv, 0, c);
    Var k = slice_cols(g, qkv, c, 2 * c);
    Var v = slice_cols(g, qkv, 2 * c, 3 * c);
    std::vector<real>* w = nullptr;
    if (attention_weights) w = &attention_weights->emplace_back();
    Var a = attention(g, q, k, v, batch, config_.heads, w);
    x = add(g, x, blk.proj(g, a));
    Var h = blk.fc2(g, gelu(g, blk.fc1(g, blk.norm2(g, x))));
    x = add(g, x, h);
  }
  return norm_(g, x);
}

Var Encoder::cls(Graph& g, Var tokens, std::size_t batch) const {
  const std::size_t t = config_.tokens() + 1;
  std::vector<std::vector<std::size_t>> rows;
  for (std::size_t b = 0; b < batch; ++b) rows.push_back({b * t});
  return gather_mean(g, tokens, rows);
}

Var Encoder::part_pool(Graph& g, Var tokens, std::size_t batch) const {
  const std::size_t t = config_.tokens() + 1;
  const std::size_t gw = config_.grid_cols(), gh = config_.grid_rows();
  if (gh % kParts != 0) throw ConfigError("part_pool: grid rows not divisible by 4");
  const std::size_t band = gh / kParts;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < kParts; ++i) {
      std::vector<std::size_t> idx;
      for (std::size_t gy = i * band; gy < (i + 1) * band; ++gy) {
        for (std::size_t gx = 0; gx < gw; ++gx) idx.push_back(b * t + 1 + gy * gw + gx);
      }
      groups.push_back(std::move(idx));
    }
  }
  return gather_mean(g, tokens, groups);
}

void Encoder::collect(std::vector<Parameter*>& out) {
  patch_embed_.collect(out);
  out.push_back(&cls_token_);
  out.push_back(&pos_embed_);
  for (Block& blk : blocks_) {
    blk.norm1.collect(out);
    blk.qkv.collect(out);
    blk.proj.collect(out);
    blk.norm2.collect(out);
    blk.fc1.collect(out);
    blk.fc2.collect(out);
  }
  norm_.collect(out);
}

}  // namespace fed
