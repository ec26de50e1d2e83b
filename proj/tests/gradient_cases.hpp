// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fed/encoder.hpp"
#include "fed/fdm.hpp"
#include "fed/layers.hpp"
#include "fed/memory.hpp"
#include "fed/oem.hpp"
#include "fed/ops.hpp"
#include "support.hpp"

namespace fed::test {

struct GradCase {
  std::string name;
  std::function<GradCheck(std::uint64_t seed)> run;
};

namespace detail {

inline Parameter leaf(const std::string& name, Shape shape, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
  return Parameter(name, random_tensor(std::move(shape), rng, lo, hi));
}

// values in [0.05, 1] with random sign keep relu and triplet selections away
// from their kinks
inline Parameter signed_leaf(const std::string& name, Shape shape, Rng& rng) {
  Parameter p = leaf(name, std::move(shape), rng, 0.05f, 1.0f);
  for (std::size_t i = 0; i < p.value.numel(); ++i) {
    if (rng.bernoulli(0.5)) p.value[i] = -p.value[i];
  }
  return p;
}

inline std::vector<Parameter*> with_prefix(std::vector<Parameter*> all, const std::string& prefix) {
  std::erase_if(all, [&](Parameter* p) { return p->name.rfind(prefix, 0) != 0; });
  return all;
}

inline GradCheckOptions opts(std::uint64_t seed, std::size_t max_elements = 0) {
  GradCheckOptions o;
  o.seed = seed;
  o.max_elements = max_elements;
  return o;
}

inline EncoderConfig tiny_encoder() {
  EncoderConfig c;
  c.height = 16;
  c.width = 8;
  c.patch = 4;
  c.depth = 1;
  c.channels = 8;
  c.heads = 2;
  c.mlp_ratio = 2;
  return c;
}

inline FdmConfig tiny_fdm() {
  FdmConfig c;
  c.dim = 16;
  c.heads = 4;
  c.k = 3;
  c.hidden = 12;
  return c;
}

inline MemoryBank random_bank(std::size_t ids, std::size_t dim, Rng& rng, float bound = 1.0f) {
  return MemoryBank(BankTag::PostOem, random_tensor({ids, dim}, rng, -bound, bound));
}

}  // namespace detail

inline std::vector<GradCase> gradient_cases() {
  using namespace detail;
  std::vector<GradCase> cases;

  cases.push_back({"matmul", [](std::uint64_t s) {
                     Rng rng(s);
                     Parameter a = leaf("a", {3, 4}, rng), b = leaf("b", {4, 2}, rng);
                     return check_gradients([&](Graph& g) { return matmul(g, g.param(a), g.param(b)); }, {&a, &b},
                                            opts(s));
                   }});
  cases.push_back({"matmul_nt", [](std::uint64_t s) {
                     Rng rng(s);
                     Parameter a = leaf("a", {3, 4}, rng), b = leaf("b", {5, 4}, rng);
                     return check_gradients([&](Graph& g) { return matmul_nt(g, g.param(a), g.param(b)); },
                                            {&a, &b}, opts(s));
                   }});
  cases.push_back({"elementwise", [](std::uint64_t s) {
                     Rng rng(s);
                     Parameter a = leaf("a", {3, 4}, rng), b = leaf("b", {3, 4}, rng);
                     return check_gradients(
                         [&](Graph& g) {
                           Var x = g.param(a), y = g.param(b);
                           return sub(g, mul(g, add(g, x, y), scale(g, y, 1.5f)), x);
                         },
                         {&a, &b}, opts(s));
                   }});
  cases.push_back({"broadcasts", [](std::uint64_t s) {
                     Rng rng(s);
                     Parameter x = leaf("x", {6, 8}, rng), bias = leaf("bias", {8}, rng);
                     Parameter tile = leaf("tile", {3, 8}, rng), rows = leaf("rows", {6, 1}, rng);
                     Parameter gates = leaf("gates", {6, 4}, rng);
                     return check_gradients(
                         [&](Graph& g) {
                           Var y = add_tiled(g, add_bias(g, g.param(x), g.param(bias)), g.param(tile));
                           return gate_parts(g, scale_rows(g, y, g.param(rows)), g.param(gates));
                         },
                         {&x, &bias, &tile, &rows, &gates}, opts(s));
                   }});
  cases.push_back({"activations", [](std::uint64_t s) {
                     Rng rng(s);
                     Parameter x = signed_leaf("x", {4, 6}, rng);
                     return check_gradients(
                         [&](Graph& g) {
                           Var v = g.param(x);
                           return concat_cols(g, {sigmoid(g, v), relu(g, v), gelu(g, v)});
                         },
                         {&x}, opts(s));
                   }});
  cases.push_back({"softmax", [](std::uint64_t s) {
                     Rng rng(s);
                     Parameter x = leaf("x", {3, 5}, rng, -2.0f, 2.0f);
                     return check_gradients([&](Graph& g) { return softmax(g, g.param(x)); }, {&x}, opts(s));
                   }});
  cases.push_back({"layer_norm", [](std::uint64_t s) {
                     Rng rng(s);
                     Parameter x = leaf("x", {4, 6}, rng);
                     LayerNorm ln("ln", 6);
                     ln.gain.value = random_tensor({6}, rng, 0.5f, 1.5f);
                     ln.bias.value = random_tensor({6}, rng);
                     return check_gradients([&](Graph& g) { return ln(g, g.param(x)); }, {&x, &ln.gain, &ln.bias},
                                            opts(s));
                   }});
  cases.push_back({"reductions_and_layout", [](std::uint64_t s) {
                     Rng rng(s);
                     Parameter x = leaf("x", {4, 6}, rng), y = leaf("y", {2, 6}, rng);
                     return check_gradients(
                         [&](Graph& g) {
                           Var a = concat_rows(g, {g.param(x), g.param(y)});
                           Var b = gather_mean(g, a, {{0, 5}, {1, 2, 3}, {4}});
                           Var c = reshape(g, slice_cols(g, b, 1, 5), {2, 6});
                           Var total = reshape(g, add(g, sum(g, c), mean(g, a)), {1, 1});
                           return concat_rows(g, {reshape(g, c, {12, 1}), total});
                         },
                         {&x, &y}, opts(s));
                   }});
  cases.push_back({"l2_normalize", [](std::uint64_t s) {
                     Rng rng(s);
                     Parameter x = leaf("x", {3, 7}, rng);
                     return check_gradients([&](Graph& g) { return l2_normalize(g, g.param(x)); }, {&x}, opts(s));
                   }});
  cases.push_back({"attention", [](std::uint64_t s) {
                     Rng rng(s);
                     Parameter q = leaf("q", {2 * 3, 8}, rng), k = leaf("k", {2 * 4, 8}, rng);
                     Parameter v = leaf("v", {2 * 4, 8}, rng);
                     return check_gradients(
                         [&](Graph& g) { return attention(g, g.param(q), g.param(k), g.param(v), 2, 2); },
                         {&q, &k, &v}, opts(s));
                   }});
  cases.push_back({"encoder", [](std::uint64_t s) {
                     Rng rng(s);
                     const EncoderConfig cfg = tiny_encoder();
                     auto enc = std::make_shared<Encoder>(cfg, rng);
                     std::vector<Image> imgs(2, Image(cfg.height, cfg.width));
                     for (auto& im : imgs) {
                       for (auto& px : im.pixels()) px = static_cast<float>(rng.uniform());
                     }
                     std::vector<const Image*> ptrs{&imgs[0], &imgs[1]};
                     std::vector<Parameter*> params;
                     enc->collect(params);
                     // cls/pos are tiny at init; give them O(1) values so
                     // their gradients are exercised
                     for (Parameter* p : params) {
                       if (p->name == "encoder.cls_token" || p->name == "encoder.pos_embed") {
                         p->value = random_tensor(p->value.shape(), rng);
                       }
                     }
                     return check_gradients(
                         [&](Graph& g) {
                           Var t = enc->encode(g, ptrs);
                           return concat_rows(g, {enc->cls(g, t, 2), enc->part_pool(g, t, 2)});
                         },
                         params, opts(s, 24));
                   }});
  cases.push_back({"oem", [](std::uint64_t s) {
                     Rng rng(s);
                     // c/4 = 4 keeps the inner layer norm well conditioned
                     OcclusionErasing oem(16, rng);
                     Parameter parts = leaf("parts", {2 * 4, 16}, rng);
                     std::vector<Parameter*> targets{&parts};
                     oem.collect(targets);
                     return check_gradients(
                         [&](Graph& g) {
                           auto out = oem.forward(g, g.param(parts), 2);
                           return concat_cols(g, {out.weighted, out.scores});
                         },
                         targets, opts(s));
                   }});
  cases.push_back({"fdm_cross_attention", [](std::uint64_t s) {
                     Rng rng(s);
                     FeatureDiffusion fdm(tiny_fdm(), rng);
                     Parameter q = leaf("f", {2, 16}, rng);
                     const Tensor centers = random_tensor({2 * 3, 16}, rng);
                     std::vector<Parameter*> all;
                     fdm.collect(all);
                     std::vector<Parameter*> targets{&q};
                     for (const char* name : {"fdm.query", "fdm.key", "fdm.value"}) {
                       for (Parameter* p : with_prefix(all, name)) targets.push_back(p);
                     }
                     return check_gradients(
                         [&](Graph& g) { return fdm.cross_attention(g, g.param(q), centers, 2); }, targets,
                         opts(s));
                   }});
  cases.push_back({"fdm_ffn", [](std::uint64_t s) {
                     Rng rng(s);
                     FeatureDiffusion fdm(tiny_fdm(), rng);
                     Parameter att = leaf("att", {2, 16}, rng), fp = leaf("fp", {2, 16}, rng);
                     std::vector<Parameter*> all;
                     fdm.collect(all);
                     std::vector<Parameter*> targets{&att, &fp};
                     for (Parameter* p : with_prefix(all, "fdm.ffn")) targets.push_back(p);
                     return check_gradients(
                         [&](Graph& g) {
                           Var h = fdm.ffn1(g, g.param(att), g.param(fp));
                           return concat_cols(g, {h, fdm.ffn2(g, h)});
                         },
                         targets, opts(s));
                   }});
  cases.push_back({"fdm_forward", [](std::uint64_t s) {
                     Rng rng(s);
                     FeatureDiffusion fdm(tiny_fdm(), rng);
                     const MemoryBank bank = random_bank(6, 16, rng);
                     Parameter fp = leaf("fp", {2, 16}, rng), scores = leaf("scores", {2, 4}, rng, 0.1f, 0.9f);
                     std::vector<Parameter*> targets{&fp, &scores};
                     fdm.collect(targets);
                     const std::vector<int> ids{1, 4};
                     return check_gradients(
                         [&](Graph& g) { return fdm.forward(g, g.param(fp), g.param(scores), bank, ids); },
                         targets, opts(s));
                   }});
  cases.push_back({"id_loss", [](std::uint64_t s) {
                     Rng rng(s);
                     Parameter logits = leaf("logits", {5, 8}, rng, -3.0f, 3.0f);
                     const std::vector<int> labels{0, 3, 7, 3, 5};
                     return check_gradients([&](Graph& g) { return cross_entropy(g, g.param(logits), labels); },
                                            {&logits}, opts(s));
                   }});
  cases.push_back({"mse_loss", [](std::uint64_t s) {
                     Rng rng(s);
                     Parameter scores = leaf("scores", {3, 4}, rng, 0.0f, 1.0f);
                     std::vector<OcclusionMask> masks(3);
                     for (auto& m : masks) {
                       for (int& v : m.stripes) v = rng.bernoulli(0.5) ? 1 : 0;
                     }
                     return check_gradients([&](Graph& g) { return occlusion_mse(g, g.param(scores), masks); },
                                            {&scores}, opts(s));
                   }});
  cases.push_back({"contrastive_loss", [](std::uint64_t s) {
                     Rng rng(s);
                     // logits scale with |c| / tau; small centers keep the
                     // third derivative, and so the difference error, small
                     const MemoryBank bank = random_bank(8, 12, rng, 0.25f);
                     Parameter f = leaf("f", {3, 12}, rng, -0.3f, 0.3f);
                     const std::vector<int> ids{2, 0, 7};
                     return check_gradients(
                         [&](Graph& g) {
                           Var v = g.param(f);
                           Var dot = contrastive_loss(g, v, bank, ids, 0.05f, Similarity::Dot);
                           Var cos = contrastive_loss(g, v, bank, ids, 0.05f, Similarity::Cosine);
                           return concat_cols(g, {dot, cos});
                         },
                         {&f}, opts(s));
                   }});
  cases.push_back({"triplet_loss", [](std::uint64_t s) {
                     Rng rng(s);
                     Parameter x = leaf("x", {6, 5}, rng);
                     const std::vector<int> labels{0, 0, 1, 1, 2, 2};
                     return check_gradients([&](Graph& g) { return triplet_hard(g, g.param(x), labels, 0.3f); },
                                            {&x}, opts(s));
                   }});
  return cases;
}

}  // namespace fed::test
