// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "fed/graph.hpp"
#include "fed/rng.hpp"

namespace fed {

/// Weight stored input-major ([in x out]) so y = x W + b.
/// Initialized uniform in +-1/sqrt(in); bias starts at zero.
struct Linear {
  Parameter weight;
  Parameter bias;
  bool has_bias = true;

  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, bool with_bias, Rng& rng);

  Var operator()(Graph& g, Var x);
  void collect(std::vector<Parameter*>& out);
};

struct LayerNorm {
  Parameter gain;
  Parameter bias;
  real eps = 1e-5f;

  LayerNorm() = default;
  LayerNorm(const std::string& name, std::size_t width);

  Var operator()(Graph& g, Var x);
  void collect(std::vector<Parameter*>& out);
};

Tensor uniform_tensor(Shape shape, real bound, Rng& rng);

}  // namespace fed
