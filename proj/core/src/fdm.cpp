// SPDX-License-Identifier: Apache-2.0
#include "fed/fdm.hpp"

#include <string>

#include "fed/errors.hpp"
#include "fed/ops.hpp"

namespace fed {

void FdmConfig::validate() const {
  if (dim == 0 || heads == 0 || dim % heads != 0) {
    throw ConfigError("FDM width " + std::to_string(dim) + " not divisible by heads " +
                      std::to_string(heads));
  }
  if (k == 0) throw ConfigError("FDM needs K >= 1");
}

Var FeatureDiffusion::FeedForward::operator()(Graph& g, Var x) {
  return fc2(g, relu(g, fc1(g, norm(g, x))));
}

FeatureDiffusion::FeatureDiffusion(const FdmConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const std::size_t d = config_.dim, h = config_.hidden_width();
  query_ = Linear("fdm.query", d, d, false, rng);
  key_ = Linear("fdm.key", d, d, false, rng);
  value_ = Linear("fdm.value", d, d, false, rng);
  ffn1_ = FeedForward{LayerNorm("fdm.ffn1.norm", d), Linear("fdm.ffn1.fc1", d, h, true, rng),
                      Linear("fdm.ffn1.fc2", h, d, true, rng)};
  ffn2_ = FeedForward{LayerNorm("fdm.ffn2.norm", d), Linear("fdm.ffn2.fc1", d, h, true, rng),
                      Linear("fdm.ffn2.fc2", h, d, true, rng)};
}

Var FeatureDiffusion::cross_attention(Graph& g, Var q_feat, const Tensor& centers, std::size_t batch,
                                      std::vector<real>* weights) {
  if (centers.rows() == 0 || batch == 0 || centers.rows() % batch != 0) {
    throw ContractError("cross_attention needs K >= 1 centers per query");
  }
  Var mem = g.constant(centers);
  Var q = query_(g, q_feat);
  Var k = key_(g, mem);
  Var v = value_(g, mem);
  return attention(g, q, k, v, batch, config_.heads, weights);
}

Var FeatureDiffusion::ffn1(Graph& g, Var attended, Var f_prime) {
  return ffn1_(g, add(g, attended, f_prime));
}

Tensor FeatureDiffusion::select_centers(const Tensor& f_prime, const MemoryBank& bank,
                                        const std::vector<int>& ids) const {
  std::vector<int> rows;
  rows.reserve(ids.size() * config_.k);
  for (std::size_t b = 0; b < ids.size(); ++b) {
    const auto near = bank.search(f_prime.row(b), ids[b], config_.k);
    rows.insert(rows.end(), near.begin(), near.end());
  }
  return bank.gather(rows);
}

Var FeatureDiffusion::forward(Graph& g, Var f_prime, Var scores, const MemoryBank& bank,
                              const std::vector<int>& ids, std::vector<real>* weights) {
  const Tensor& fv = g.value(f_prime);
  if (fv.cols() != config_.dim || fv.rows() != ids.size()) {
    throw DimensionError("FDM expects [" + std::to_string(ids.size()) + "x" +
                         std::to_string(config_.dim) + "] features, got " + shape_string(fv.shape()));
  }
  const Tensor centers = select_centers(fv, bank, ids);
  Var attended = cross_attention(g, f_prime, centers, ids.size(), weights);
  Var transformed = ffn1(g, attended, f_prime);
  Var mixed = add(g, gate_parts(g, transformed, scores), f_prime);
  return ffn2_(g, mixed);
}

void FeatureDiffusion::collect(std::vector<Parameter*>& out) {
  query_.collect(out);
  key_.collect(out);
  value_.collect(out);
  for (FeedForward* f : {&ffn1_, &ffn2_}) {
    f->norm.collect(out);
    f->fc1.collect(out);
    f->fc2.collect(out);
  }
}

}  // namespace fed
