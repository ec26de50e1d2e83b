// SPDX-License-Identifier: Apache-2.0
#include "fed/graph.hpp"

#include "fed/errors.hpp"

namespace fed {

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}, nullptr});
  return Var{nodes_.size() - 1};
}

Var Graph::input(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, grad_enabled_, {}, nullptr});
  return Var{nodes_.size() - 1};
}

Var Graph::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{it->second};
  nodes_.push_back(Node{p.value, {}, p.trainable && grad_enabled_, {}, &p});
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return Var{nodes_.size() - 1};
}

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.empty()) return Tensor(n.value.shape(), 0.0f);
  return n.grad;
}

Tensor* Graph::grad_buffer(Var v) {
  Node& n = nodes_.at(v.id);
  if (!n.requires_grad) return nullptr;
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0f);
  return &n.grad;
}

Var Graph::record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
  bool needs = false;
  for (Var p : parents) needs = needs || nodes_.at(p.id).requires_grad;
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(fn) : BackwardFn{}, nullptr});
  return Var{nodes_.size() - 1};
}

Var Graph::record(Tensor value, const std::vector<Var>& parents, BackwardFn fn) {
  bool needs = false;
  for (Var p : parents) needs = needs || nodes_.at(p.id).requires_grad;
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(fn) : BackwardFn{}, nullptr});
  return Var{nodes_.size() - 1};
}

void Graph::backward(Var loss) {
  Node& root = nodes_.at(loss.id);
  if (root.value.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        shape_string(root.value.shape()));
  }
  for (Node& n : nodes_) {
    if (!n.grad.empty()) n.grad.fill(0.0f);
  }
  if (!root.requires_grad) return;
  grad_buffer(loss)->fill(1.0f);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backward) {
      // parents always precede n, and the tape does not grow during backward
      n.backward(*this, n.grad);
    } else if (n.param != nullptr) {
      real* dst = n.param->grad.data();
      const real* src = n.grad.data();
      for (std::size_t j = 0; j < n.grad.numel(); ++j) dst[j] += src[j];
    }
  }
}

}  // namespace fed
