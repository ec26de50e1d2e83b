// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "fed/graph.hpp"
#include "fed/ops.hpp"
#include "fed/rng.hpp"
#include "fed/tensor.hpp"

namespace fed::test {

inline Tensor random_tensor(Shape shape, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

struct GradCheck {
  bool ok = true;
  std::size_t checked = 0;
  double worst_excess = 0.0;  // largest |a - n| - allowed, <= 0 when passing
  std::string worst;
};

struct GradCheckOptions {
  double step = 1e-3;
  double rel = 1e-3;
  double abs_floor = 1e-5;
  /// Elements probed per target; 0 checks all of them.
  std::size_t max_elements = 0;
  std::uint64_t seed = 1;
};

/// Compares backward() against central differences of L = sum(w * build(g))
/// for fixed random w. Every target is a Parameter so inputs and weights are
/// handled the same way; L is summed in double on the numeric side.
inline GradCheck check_gradients(const std::function<Var(Graph&)>& build, const std::vector<Parameter*>& targets,
                                 const GradCheckOptions& opt = {}) {
  Rng rng(derive_seed(opt.seed, "gradcheck"));
  Tensor w;
  {
    Graph g;
    Var y = build(g);
    w = random_tensor(g.value(y).shape(), rng);
    for (Parameter* p : targets) p->zero_grad();
    Var loss = sum(g, mul(g, y, g.constant(w)));
    g.backward(loss);
  }
  std::vector<Tensor> analytic;
  for (Parameter* p : targets) analytic.push_back(p->grad);

  auto eval = [&]() {
    Graph g(false);
    const Tensor& y = g.value(build(g));
    double acc = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) acc += static_cast<double>(y[i]) * w[i];
    return acc;
  };

  GradCheck out;
  out.worst_excess = -1.0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    Parameter& p = *targets[t];
    const std::size_t n = p.value.numel();
    std::vector<std::size_t> idx;
    if (opt.max_elements == 0 || opt.max_elements >= n) {
      for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
    } else {
      for (std::size_t i = 0; i < opt.max_elements; ++i) {
        idx.push_back(static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1)));
      }
    }
    for (std::size_t i : idx) {
      const float orig = p.value[i];
      p.value[i] = static_cast<float>(orig + opt.step);
      const double up = eval();
      p.value[i] = static_cast<float>(orig - opt.step);
      const double down = eval();
      p.value[i] = orig;
      // the step actually taken after rounding to float
      const double h = (static_cast<double>(static_cast<float>(orig + opt.step)) -
                        static_cast<double>(static_cast<float>(orig - opt.step)));
      const double numeric = (up - down) / h;
      const double a = analytic[t][i];
      const double allowed = std::max(opt.abs_floor, opt.rel * std::max(std::abs(a), std::abs(numeric)));
      const double excess = std::abs(a - numeric) - allowed;
      ++out.checked;
      if (excess > out.worst_excess) {
        out.worst_excess = excess;
        out.worst = p.name + "[" + std::to_string(i) + "] analytic=" + std::to_string(a) +
                    " numeric=" + std::to_string(numeric);
      }
      if (excess > 0.0) out.ok = false;
    }
  }
  return out;
}

}  // namespace fed::test
