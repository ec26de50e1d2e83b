// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <unordered_map>
#include <vector>

#include "fed/tensor.hpp"

namespace fed {

/// Handle to a value recorded on a Graph.
struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
  bool valid() const { return id != kNone; }
};

/// Operation tape for reverse-mode differentiation. A fresh Graph is built for
/// every training step; values stay alive until the Graph is destroyed.
///
/// Parameters enter through param(), which caches one leaf per Parameter so
/// both branches of a step share the same node. backward() accumulates into
/// Parameter::grad; callers zero gradients between steps.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

  /// With `grad_enabled` false, parameters enter as constants and no backward
  /// closures are kept (inference).
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  /// Differentiable leaf that is not a Parameter (gradient checks, inputs).
  Var input(Tensor value);
  Var param(Parameter& p);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  /// Gradient of the last backward() target w.r.t. v; zeros if untouched.
  Tensor grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and runs the tape in reverse.
  void backward(Var loss);

  /// Records an op result. `fn` runs only when some parent needs gradients.
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(Tensor value, const std::vector<Var>& parents, BackwardFn fn);

  /// Gradient accumulator for v, allocated on first use. No-op target when v
  /// does not require gradients (returns nullptr).
  Tensor* grad_buffer(Var v);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, std::size_t> param_nodes_;
  bool grad_enabled_ = true;
};

}  // namespace fed
