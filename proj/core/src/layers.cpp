// SPDX-License-Identifier: Apache-2.0
#include "fed/layers.hpp"

#include <cmath>

#include "fed/ops.hpp"

namespace fed {

Tensor uniform_tensor(Shape shape, real bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.vec()) v = static_cast<real>(rng.uniform(-bound, bound));
  return t;
}

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, bool with_bias, Rng& rng)
    : weight(name + ".weight", uniform_tensor({in, out}, 1.0f / std::sqrt(static_cast<real>(in)), rng), true),
      bias(name + ".bias", Tensor({out}, 0.0f)),
      has_bias(with_bias) {}

Var Linear::operator()(Graph& g, Var x) {
  Var y = matmul(g, x, g.param(weight));
  return has_bias ? add_bias(g, y, g.param(bias)) : y;
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  if (has_bias) out.push_back(&bias);
}

LayerNorm::LayerNorm(const std::string& name, std::size_t width)
    : gain(name + ".gain", Tensor({width}, 1.0f)), bias(name + ".bias", Tensor({width}, 0.0f)) {}

Var LayerNorm::operator()(Graph& g, Var x) {
  return layer_norm(g, x, g.param(gain), g.param(bias), eps);
}

void LayerNorm::collect(std::vector<Parameter*>& out) {
  out.push_back(&gain);
  out.push_back(&bias);
}

}  // namespace fed
