// SPDX-License-Identifier: Apache-2.0
#include "fed/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "fed/errors.hpp"
#include "kernels.hpp"

namespace fed {

namespace {

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

template <typename F>
Var unary(Graph& g, Var x, F&& f, Graph::BackwardFn back) {
  const Tensor& in = g.value(x);
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.numel(); ++i) out[i] = f(in[i]);
  return g.record(std::move(out), {x}, std::move(back));
}

}  // namespace

Var matmul(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  const std::size_t m = av.rows(), k = av.cols(), p = bv.cols();
  if (bv.rows() != k) {
    throw DimensionError("matmul: shape mismatch " + shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()));
  }
  Tensor out = Tensor::matrix(m, p);
  kernels::gemm_nn(av.data(), bv.data(), out.data(), m, k, p, false);
  return g.record(std::move(out), {a, b}, [a, b, m, k, p](Graph& g, const Tensor& dc) {
    if (Tensor* da = g.grad_buffer(a)) {
      kernels::gemm_nt(dc.data(), g.value(b).data(), da->data(), m, p, k, true);
    }
    if (Tensor* db = g.grad_buffer(b)) {
      kernels::gemm_tn(g.value(a).data(), dc.data(), db->data(), k, m, p, true);
    }
  });
}

Var matmul_nt(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  const std::size_t m = av.rows(), k = av.cols(), p = bv.rows();
  if (bv.cols() != k) {
    throw DimensionError("matmul_nt: shape mismatch " + shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()) + "^T");
  }
  Tensor out = Tensor::matrix(m, p);
  kernels::gemm_nt(av.data(), bv.data(), out.data(), m, k, p, false);
  return g.record(std::move(out), {a, b}, [a, b, m, k, p](Graph& g, const Tensor& dc) {
    // dA = dC * B, dB = dC^T * A
    if (Tensor* da = g.grad_buffer(a)) {
      kernels::gemm_nn(dc.data(), g.value(b).data(), da->data(), m, p, k, true);
    }
    if (Tensor* db = g.grad_buffer(b)) {
      kernels::gemm_tn(dc.data(), g.value(a).data(), db->data(), p, m, k, true);
    }
  });
}

Var add(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  require_same("add", av, bv);
  Tensor out = av;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& dc) {
    for (Var v : {a, b}) {
      if (Tensor* d = g.grad_buffer(v)) {
        for (std::size_t i = 0; i < dc.numel(); ++i) (*d)[i] += dc[i];
      }
    }
  });
}

Var sub(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  require_same("sub", av, bv);
  Tensor out = av;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& dc) {
    if (Tensor* d = g.grad_buffer(a)) {
      for (std::size_t i = 0; i < dc.numel(); ++i) (*d)[i] += dc[i];
    }
    if (Tensor* d = g.grad_buffer(b)) {
      for (std::size_t i = 0; i < dc.numel(); ++i) (*d)[i] -= dc[i];
    }
  });
}

Var mul(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  require_same("mul", av, bv);
  Tensor out = av;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& dc) {
    if (Tensor* d = g.grad_buffer(a)) {
      const Tensor& other = g.value(b);
      for (std::size_t i = 0; i < dc.numel(); ++i) (*d)[i] += dc[i] * other[i];
    }
    if (Tensor* d = g.grad_buffer(b)) {
      const Tensor& other = g.value(a);
      for (std::size_t i = 0; i < dc.numel(); ++i) (*d)[i] += dc[i] * other[i];
    }
  });
}

Var scale(Graph& g, Var a, real factor) {
  return unary(
      g, a, [factor](real x) { return x * factor; },
      [a, factor](Graph& g, const Tensor& dc) {
        if (Tensor* d = g.grad_buffer(a)) {
          for (std::size_t i = 0; i < dc.numel(); ++i) (*d)[i] += dc[i] * factor;
        }
      });
}

Var add_bias(Graph& g, Var x, Var bias) {
  const Tensor& xv = g.value(x);
  const Tensor& bv = g.value(bias);
  const std::size_t m = xv.rows(), n = xv.cols();
  if (bv.numel() != n) {
    throw DimensionError("add_bias: bias " + shape_string(bv.shape()) + " does not match " +
                         shape_string(xv.shape()));
  }
  Tensor out = xv;
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) out.at(r, c) += bv[c];
  }
  return g.record(std::move(out), {x, bias}, [x, bias, m, n](Graph& g, const Tensor& dc) {
    if (Tensor* d = g.grad_buffer(x)) {
      for (std::size_t i = 0; i < dc.numel(); ++i) (*d)[i] += dc[i];
    }
    if (Tensor* d = g.grad_buffer(bias)) {
      std::vector<double> acc(n, 0.0);
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) acc[c] += dc[r * n + c];
      }
      for (std::size_t c = 0; c < n; ++c) (*d)[c] += static_cast<real>(acc[c]);
    }
  });
}

Var add_tiled(Graph& g, Var x, Var tile) {
  const Tensor& xv = g.value(x);
  const Tensor& tv = g.value(tile);
  const std::size_t t = tv.rows(), n = tv.cols();
  if (xv.cols() != n || xv.rows() % t != 0) {
    throw DimensionError("add_tiled: " + shape_string(xv.shape()) + " is not tiled by " +
                         shape_string(tv.shape()));
  }
  Tensor out = xv;
  const std::size_t blocks = xv.rows() / t;
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t i = 0; i < t * n; ++i) out[b * t * n + i] += tv[i];
  }
  return g.record(std::move(out), {x, tile}, [x, tile, t, n, blocks](Graph& g, const Tensor& dc) {
    if (Tensor* d = g.grad_buffer(x)) {
      for (std::size_t i = 0; i < dc.numel(); ++i) (*d)[i] += dc[i];
    }
    if (Tensor* d = g.grad_buffer(tile)) {
      std::vector<double> acc(t * n, 0.0);
      for (std::size_t b = 0; b < blocks; ++b) {
        for (std::size_t i = 0; i < t * n; ++i) acc[i] += dc[b * t * n + i];
      }
      for (std::size_t i = 0; i < t * n; ++i) (*d)[i] += static_cast<real>(acc[i]);
    }
  });
}

Var scale_rows(Graph& g, Var x, Var s) {
  const Tensor& xv = g.value(x);
  const Tensor& sv = g.value(s);
  const std::size_t m = xv.rows(), n = xv.cols();
  if (sv.numel() != m) {
    throw DimensionError("scale_rows: scales " + shape_string(sv.shape()) + " vs rows of " +
                         shape_string(xv.shape()));
  }
  Tensor out = xv;
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) out.at(r, c) = sv[r] * xv.at(r, c);
  }
  return g.record(std::move(out), {x, s}, [x, s, m, n](Graph& g, const Tensor& dc) {
    if (Tensor* d = g.grad_buffer(x)) {
      const Tensor& sv = g.value(s);
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) (*d)[r * n + c] += dc[r * n + c] * sv[r];
      }
    }
    if (Tensor* d = g.grad_buffer(s)) {
      const Tensor& xv = g.value(x);
      for (std::size_t r = 0; r < m; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < n; ++c) acc += static_cast<double>(dc[r * n + c]) * xv[r * n + c];
        (*d)[r] += static_cast<real>(acc);
      }
    }
  });
}

Var l2_normalize(Graph& g, Var x, real eps) {
  const Tensor& xv = g.value(x);
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor out = xv;
  std::vector<real> norms(m);
  for (std::size_t r = 0; r < m; ++r) {
    double sq = eps;
    for (std::size_t c = 0; c < n; ++c) sq += static_cast<double>(xv[r * n + c]) * xv[r * n + c];
    norms[r] = static_cast<real>(std::sqrt(sq));
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = xv[r * n + c] / norms[r];
  }
  const std::size_t y_id = g.size();
  return g.record(std::move(out), {x}, [x, y_id, m, n, norms = std::move(norms)](Graph& g, const Tensor& dy) {
    Tensor* d = g.grad_buffer(x);
    if (!d) return;
    const Tensor& y = g.value(Var{y_id});
    for (std::size_t r = 0; r < m; ++r) {
      double proj = 0.0;
      for (std::size_t c = 0; c < n; ++c) proj += static_cast<double>(y[r * n + c]) * dy[r * n + c];
      for (std::size_t c = 0; c < n; ++c) {
        (*d)[r * n + c] += static_cast<real>((dy[r * n + c] - y[r * n + c] * proj) / norms[r]);
      }
    }
  });
}

Var gate_parts(Graph& g, Var x, Var s) {
  const Tensor& xv = g.value(x);
  const Tensor& sv = g.value(s);
  const std::size_t m = xv.rows(), n = xv.cols(), parts = sv.cols();
  if (sv.rows() != m || parts == 0 || n % parts != 0) {
    throw DimensionError("gate_parts: gates " + shape_string(sv.shape()) + " vs features " +
                         shape_string(xv.shape()));
  }
  const std::size_t width = n / parts;
  Tensor out = xv;
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) out.at(r, c) = sv.at(r, c / width) * xv.at(r, c);
  }
  return g.record(std::move(out), {x, s}, [x, s, m, n, parts, width](Graph& g, const Tensor& dc) {
    if (Tensor* d = g.grad_buffer(x)) {
      const Tensor& sv = g.value(s);
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) (*d)[r * n + c] += dc[r * n + c] * sv[r * parts + c / width];
      }
    }
    if (Tensor* d = g.grad_buffer(s)) {
      const Tensor& xv = g.value(x);
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t j = 0; j < parts; ++j) {
          double acc = 0.0;
          for (std::size_t c = j * width; c < (j + 1) * width; ++c) {
            acc += static_cast<double>(dc[r * n + c]) * xv[r * n + c];
          }
          (*d)[r * parts + j] += static_cast<real>(acc);
        }
      }
    }
  });
}

Var sigmoid(Graph& g, Var x) {
  auto f = [](real v) {
    // split by sign so exp never overflows
    if (v >= 0.0f) return 1.0f / (1.0f + std::exp(-v));
    const real e = std::exp(v);
    return e / (1.0f + e);
  };
  Tensor out(g.value(x).shape());
  const Tensor& in = g.value(x);
  for (std::size_t i = 0; i < in.numel(); ++i) out[i] = f(in[i]);
  const std::size_t y_id = g.size();
  return g.record(std::move(out), {x}, [x, y_id](Graph& g, const Tensor& dc) {
    if (Tensor* d = g.grad_buffer(x)) {
      const Tensor& yv = g.value(Var{y_id});
      for (std::size_t i = 0; i < dc.numel(); ++i) (*d)[i] += dc[i] * yv[i] * (1.0f - yv[i]);
    }
  });
}

Var relu(Graph& g, Var x) {
  return unary(
      g, x, [](real v) { return v > 0.0f ? v : 0.0f; },
      [x](Graph& g, const Tensor& dc) {
        if (Tensor* d = g.grad_buffer(x)) {
          const Tensor& in = g.value(x);
          for (std::size_t i = 0; i < dc.numel(); ++i) {
            if (in[i] > 0.0f) (*d)[i] += dc[i];
          }
        }
      });
}

Var gelu(Graph& g, Var x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return unary(
      g, x,
      [](real v) {
        const double d = v;
        return static_cast<real>(0.5 * d * (1.0 + std::erf(d * kInvSqrt2)));
      },
      [x](Graph& g, const Tensor& dc) {
        if (Tensor* d = g.grad_buffer(x)) {
          const Tensor& in = g.value(x);
          for (std::size_t i = 0; i < dc.numel(); ++i) {
            const double v = in[i];
            const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
            (*d)[i] += static_cast<real>(dc[i] * (cdf + v * pdf));
          }
        }
      });
}

Var layer_norm(Graph& g, Var x, Var gain, Var bias, real eps) {
  const Tensor& xv = g.value(x);
  const std::size_t m = xv.rows(), n = xv.cols();
  if (n == 0) throw DimensionError("layer_norm: zero-width rows");
  if (g.value(gain).numel() != n || g.value(bias).numel() != n) {
    throw DimensionError("layer_norm: gain/bias " + shape_string(g.value(gain).shape()) +
                         " do not match rows of " + shape_string(xv.shape()));
  }
  const Tensor& gv = g.value(gain);
  const Tensor& bv = g.value(bias);
  auto xhat = std::make_shared<std::vector<real>>(m * n);
  auto inv_std = std::make_shared<std::vector<double>>(m);
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < m; ++r) {
    const real* row = xv.data() + r * n;
    double mu = 0.0;
    for (std::size_t c = 0; c < n; ++c) mu += row[c];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < n; ++c) {
      const double h = (row[c] - mu) * is;
      (*xhat)[r * n + c] = static_cast<real>(h);
      out[r * n + c] = static_cast<real>(h * gv[c] + bv[c]);
    }
  }
  return g.record(std::move(out), {x, gain, bias},
                  [x, gain, bias, m, n, xhat, inv_std](Graph& g, const Tensor& dc) {
                    const Tensor& gv = g.value(gain);
                    if (Tensor* dg = g.grad_buffer(gain)) {
                      for (std::size_t c = 0; c < n; ++c) {
                        double acc = 0.0;
                        for (std::size_t r = 0; r < m; ++r) acc += static_cast<double>(dc[r * n + c]) * (*xhat)[r * n + c];
                        (*dg)[c] += static_cast<real>(acc);
                      }
                    }
                    if (Tensor* db = g.grad_buffer(bias)) {
                      for (std::size_t c = 0; c < n; ++c) {
                        double acc = 0.0;
                        for (std::size_t r = 0; r < m; ++r) acc += dc[r * n + c];
                        (*db)[c] += static_cast<real>(acc);
                      }
                    }
                    if (Tensor* dx = g.grad_buffer(x)) {
                      for (std::size_t r = 0; r < m; ++r) {
                        double mean_dh = 0.0, mean_dh_h = 0.0;
                        for (std::size_t c = 0; c < n; ++c) {
                          const double dh = static_cast<double>(dc[r * n + c]) * gv[c];
                          mean_dh += dh;
                          mean_dh_h += dh * (*xhat)[r * n + c];
                        }
                        mean_dh /= static_cast<double>(n);
                        mean_dh_h /= static_cast<double>(n);
                        for (std::size_t c = 0; c < n; ++c) {
                          const double dh = static_cast<double>(dc[r * n + c]) * gv[c];
                          const double h = (*xhat)[r * n + c];
                          (*dx)[r * n + c] += static_cast<real>((*inv_std)[r] * (dh - mean_dh - h * mean_dh_h));
                        }
                      }
                    }
                  });
}

Var softmax(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < m; ++r) {
    const real* row = xv.data() + r * n;
    const real mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t c = 0; c < n; ++c) z += std::exp(static_cast<double>(row[c]) - mx);
    for (std::size_t c = 0; c < n; ++c) {
      out[r * n + c] = static_cast<real>(std::exp(static_cast<double>(row[c]) - mx) / z);
    }
  }
  const std::size_t y_id = g.size();
  return g.record(std::move(out), {x}, [x, y_id, m, n](Graph& g, const Tensor& dc) {
    if (Tensor* d = g.grad_buffer(x)) {
      const Tensor& y = g.value(Var{y_id});
      for (std::size_t r = 0; r < m; ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < n; ++c) dot += static_cast<double>(dc[r * n + c]) * y[r * n + c];
        for (std::size_t c = 0; c < n; ++c) {
          (*d)[r * n + c] += static_cast<real>(y[r * n + c] * (dc[r * n + c] - dot));
        }
      }
    }
  });
}

Var sum(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  double acc = 0.0;
  for (real v : xv.vec()) acc += v;
  return g.record(Tensor::scalar(static_cast<real>(acc)), {x}, [x](Graph& g, const Tensor& dc) {
    if (Tensor* d = g.grad_buffer(x)) {
      for (auto& v : d->vec()) v += dc[0];
    }
  });
}

Var mean(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  double acc = 0.0;
  for (real v : xv.vec()) acc += v;
  const double n = static_cast<double>(xv.numel());
  return g.record(Tensor::scalar(static_cast<real>(acc / n)), {x}, [x, n](Graph& g, const Tensor& dc) {
    if (Tensor* d = g.grad_buffer(x)) {
      const real share = static_cast<real>(dc[0] / n);
      for (auto& v : d->vec()) v += share;
    }
  });
}

Var reshape(Graph& g, Var x, Shape shape) {
  Tensor out = g.value(x).reshaped(std::move(shape));
  return g.record(std::move(out), {x}, [x](Graph& g, const Tensor& dc) {
    if (Tensor* d = g.grad_buffer(x)) {
      for (std::size_t i = 0; i < dc.numel(); ++i) (*d)[i] += dc[i];
    }
  });
}

Var concat_cols(Graph& g, const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t m = g.value(parts[0]).rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor& t = g.value(p);
    if (t.rows() != m) {
      throw DimensionError("concat_cols: row mismatch " + shape_string(g.value(parts[0]).shape()) +
                           " vs " + shape_string(t.shape()));
    }
    widths.push_back(t.cols());
    total += t.cols();
  }
  Tensor out = Tensor::matrix(m, total);
  std::size_t off = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor& t = g.value(parts[i]);
    for (std::size_t r = 0; r < m; ++r) {
      std::copy_n(t.data() + r * widths[i], widths[i], out.data() + r * total + off);
    }
    off += widths[i];
  }
  return g.record(std::move(out), parts, [parts, widths, m, total](Graph& g, const Tensor& dc) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (Tensor* d = g.grad_buffer(parts[i])) {
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t c = 0; c < widths[i]; ++c) (*d)[r * widths[i] + c] += dc[r * total + off + c];
        }
      }
      off += widths[i];
    }
  });
}

Var concat_rows(Graph& g, const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const std::size_t n = g.value(parts[0]).cols();
  std::size_t rows = 0;
  for (Var p : parts) {
    const Tensor& t = g.value(p);
    if (t.cols() != n) {
      throw DimensionError("concat_rows: column mismatch " + shape_string(g.value(parts[0]).shape()) +
                           " vs " + shape_string(t.shape()));
    }
    rows += t.rows();
  }
  Tensor out = Tensor::matrix(rows, n);
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& t = g.value(p);
    std::copy(t.vec().begin(), t.vec().end(), out.data() + off);
    off += t.numel();
  }
  return g.record(std::move(out), parts, [parts](Graph& g, const Tensor& dc) {
    std::size_t off = 0;
    for (Var p : parts) {
      const std::size_t len = g.value(p).numel();
      if (Tensor* d = g.grad_buffer(p)) {
        for (std::size_t i = 0; i < len; ++i) (*d)[i] += dc[off + i];
      }
      off += len;
    }
  });
}

Var slice_cols(Graph& g, Var x, std::size_t begin, std::size_t end) {
  const Tensor& xv = g.value(x);
  const std::size_t m = xv.rows(), n = xv.cols();
  if (begin >= end || end > n) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range for " + shape_string(xv.shape()));
  }
  const std::size_t w = end - begin;
  Tensor out = Tensor::matrix(m, w);
  for (std::size_t r = 0; r < m; ++r) std::copy_n(xv.data() + r * n + begin, w, out.data() + r * w);
  return g.record(std::move(out), {x}, [x, m, n, begin, w](Graph& g, const Tensor& dc) {
    if (Tensor* d = g.grad_buffer(x)) {
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < w; ++c) (*d)[r * n + begin + c] += dc[r * w + c];
      }
    }
  });
}

Var gather_mean(Graph& g, Var x, const std::vector<std::vector<std::size_t>>& groups) {
  const Tensor& xv = g.value(x);
  const std::size_t m = xv.rows(), n = xv.cols();
  if (groups.empty()) throw ContractError("gather_mean: no groups");
  Tensor out = Tensor::matrix(groups.size(), n);
  std::vector<double> acc(n);
  for (std::size_t r = 0; r < groups.size(); ++r) {
    if (groups[r].empty()) throw ContractError("gather_mean: empty group");
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t src : groups[r]) {
      if (src >= m) throw DimensionError("gather_mean: row index out of range");
      for (std::size_t c = 0; c < n; ++c) acc[c] += xv[src * n + c];
    }
    const double inv = 1.0 / static_cast<double>(groups[r].size());
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = static_cast<real>(acc[c] * inv);
  }
  return g.record(std::move(out), {x}, [x, groups, n](Graph& g, const Tensor& dc) {
    if (Tensor* d = g.grad_buffer(x)) {
      for (std::size_t r = 0; r < groups.size(); ++r) {
        const real inv = 1.0f / static_cast<real>(groups[r].size());
        for (std::size_t src : groups[r]) {
          for (std::size_t c = 0; c < n; ++c) (*d)[src * n + c] += dc[r * n + c] * inv;
        }
      }
    }
  });
}

Var attention(Graph& g, Var q, Var k, Var v, std::size_t batch, std::size_t heads,
              std::vector<real>* weights) {
  const Tensor& qv = g.value(q);
  const Tensor& kv = g.value(k);
  const Tensor& vv = g.value(v);
  const std::size_t d = qv.cols();
  if (batch == 0 || heads == 0) throw ContractError("attention: batch and heads must be positive");
  if (kv.rows() == 0 || kv.rows() != vv.rows()) {
    throw ContractError("attention: needs at least one key/value row per block");
  }
  if (kv.cols() != d || vv.cols() != d || d % heads != 0 || qv.rows() % batch != 0 ||
      kv.rows() % batch != 0) {
    throw DimensionError("attention: incompatible shapes q" + shape_string(qv.shape()) + " k" +
                         shape_string(kv.shape()) + " v" + shape_string(vv.shape()));
  }
  const std::size_t tq = qv.rows() / batch, tk = kv.rows() / batch, dh = d / heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  auto probs = std::make_shared<std::vector<real>>(batch * heads * tq * tk);
  Tensor out = Tensor::matrix(batch * tq, d);
  std::vector<double> logits(tk);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t col = h * dh;
      for (std::size_t i = 0; i < tq; ++i) {
        const real* qi = qv.data() + (b * tq + i) * d + col;
        double mx = -INFINITY;
        for (std::size_t j = 0; j < tk; ++j) {
          const real* kj = kv.data() + (b * tk + j) * d + col;
          double dot = 0.0;
          for (std::size_t c = 0; c < dh; ++c) dot += static_cast<double>(qi[c]) * kj[c];
          logits[j] = dot * inv_scale;
          mx = std::max(mx, logits[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < tk; ++j) {
          logits[j] = std::exp(logits[j] - mx);
          z += logits[j];
        }
        real* p = probs->data() + ((b * heads + h) * tq + i) * tk;
        for (std::size_t j = 0; j < tk; ++j) p[j] = static_cast<real>(logits[j] / z);
        real* oi = out.data() + (b * tq + i) * d + col;
        for (std::size_t c = 0; c < dh; ++c) {
          double acc = 0.0;
          for (std::size_t j = 0; j < tk; ++j) acc += static_cast<double>(p[j]) * vv[(b * tk + j) * d + col + c];
          oi[c] = static_cast<real>(acc);
        }
      }
    }
  }
  if (weights != nullptr) *weights = *probs;

  return g.record(std::move(out), {q, k, v},
                  [q, k, v, batch, heads, tq, tk, d, dh, inv_scale, probs](Graph& g, const Tensor& dc) {
                    const Tensor& qv = g.value(q);
                    const Tensor& kv = g.value(k);
                    const Tensor& vv = g.value(v);
                    Tensor* dq = g.grad_buffer(q);
                    Tensor* dk = g.grad_buffer(k);
                    Tensor* dv = g.grad_buffer(v);
                    std::vector<double> dp(tk), ds(tk);
                    for (std::size_t b = 0; b < batch; ++b) {
                      for (std::size_t h = 0; h < heads; ++h) {
                        const std::size_t col = h * dh;
                        for (std::size_t i = 0; i < tq; ++i) {
                          const real* p = probs->data() + ((b * heads + h) * tq + i) * tk;
                          const real* doi = dc.data() + (b * tq + i) * d + col;
                          double pdp = 0.0;
                          for (std::size_t j = 0; j < tk; ++j) {
                            const real* vj = vv.data() + (b * tk + j) * d + col;
                            double acc = 0.0;
                            for (std::size_t c = 0; c < dh; ++c) acc += static_cast<double>(doi[c]) * vj[c];
                            dp[j] = acc;
                            pdp += p[j] * acc;
                            if (dv) {
                              real* dvj = dv->data() + (b * tk + j) * d + col;
                              for (std::size_t c = 0; c < dh; ++c) dvj[c] += p[j] * doi[c];
                            }
                          }
                          for (std::size_t j = 0; j < tk; ++j) ds[j] = p[j] * (dp[j] - pdp) * inv_scale;
                          const real* qi = qv.data() + (b * tq + i) * d + col;
                          if (dq) {
                            real* dqi = dq->data() + (b * tq + i) * d + col;
                            for (std::size_t c = 0; c < dh; ++c) {
                              double acc = 0.0;
                              for (std::size_t j = 0; j < tk; ++j) acc += ds[j] * kv[(b * tk + j) * d + col + c];
                              dqi[c] += static_cast<real>(acc);
                            }
                          }
                          if (dk) {
                            for (std::size_t j = 0; j < tk; ++j) {
                              real* dkj = dk->data() + (b * tk + j) * d + col;
                              for (std::size_t c = 0; c < dh; ++c) dkj[c] += static_cast<real>(ds[j] * qi[c]);
                            }
                          }
                        }
                      }
                    }
                  });
}

Var cross_entropy(Graph& g, Var logits, const std::vector<int>& labels) {
  const Tensor& lv = g.value(logits);
  const std::size_t m = lv.rows(), n = lv.cols();
  if (labels.size() != m) {
    throw ContractError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(m) + " rows");
  }
  auto probs = std::make_shared<std::vector<double>>(m * n);
  double total = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= n) {
      throw ContractError("cross_entropy: label " + std::to_string(labels[r]) +
                          " outside [0, " + std::to_string(n) + ")");
    }
    const real* row = lv.data() + r * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t c = 0; c < n; ++c) z += std::exp(row[c] - mx);
    const double lse = mx + std::log(z);
    total += lse - row[labels[r]];
    for (std::size_t c = 0; c < n; ++c) (*probs)[r * n + c] = std::exp(row[c] - lse);
  }
  return g.record(Tensor::scalar(static_cast<real>(total / static_cast<double>(m))), {logits},
                  [logits, labels, probs, m, n](Graph& g, const Tensor& dc) {
                    if (Tensor* d = g.grad_buffer(logits)) {
                      const double s = dc[0] / static_cast<double>(m);
                      for (std::size_t r = 0; r < m; ++r) {
                        for (std::size_t c = 0; c < n; ++c) {
                          const double y = static_cast<int>(c) == labels[r] ? 1.0 : 0.0;
                          (*d)[r * n + c] += static_cast<real>(s * ((*probs)[r * n + c] - y));
                        }
                      }
                    }
                  });
}

Var mse(Graph& g, Var pred, const Tensor& target) {
  const Tensor& pv = g.value(pred);
  if (pv.numel() != target.numel()) {
    throw DimensionError("mse: prediction " + shape_string(pv.shape()) + " vs target " +
                         shape_string(target.shape()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pv.numel(); ++i) {
    const double e = static_cast<double>(pv[i]) - target[i];
    acc += e * e;
  }
  const double n = static_cast<double>(pv.numel());
  return g.record(Tensor::scalar(static_cast<real>(acc / n)), {pred},
                  [pred, target, n](Graph& g, const Tensor& dc) {
                    if (Tensor* d = g.grad_buffer(pred)) {
                      const Tensor& pv = g.value(pred);
                      for (std::size_t i = 0; i < pv.numel(); ++i) {
                        (*d)[i] += static_cast<real>(dc[0] * 2.0 * (static_cast<double>(pv[i]) - target[i]) / n);
                      }
                    }
                  });
}

Var triplet_hard(Graph& g, Var x, const std::vector<int>& labels, real margin) {
  const Tensor& xv = g.value(x);
  const std::size_t m = xv.rows(), n = xv.cols();
  if (labels.size() != m) throw ContractError("triplet_hard: label count does not match rows");
  std::vector<double> dist(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        const double e = static_cast<double>(xv[i * n + c]) - xv[j * n + c];
        acc += e * e;
      }
      dist[i * m + j] = dist[j * m + i] = std::sqrt(acc + 1e-12);
    }
  }
  struct Triplet {
    std::size_t a, p, n;
  };
  auto active = std::make_shared<std::vector<Triplet>>();
  double total = 0.0;
  std::size_t anchors = 0;
  for (std::size_t a = 0; a < m; ++a) {
    std::size_t hp = m, hn = m;
    for (std::size_t j = 0; j < m; ++j) {
      if (j == a) continue;
      if (labels[j] == labels[a]) {
        if (hp == m || dist[a * m + j] > dist[a * m + hp]) hp = j;
      } else if (hn == m || dist[a * m + j] < dist[a * m + hn]) {
        hn = j;
      }
    }
    if (hp == m || hn == m) continue;
    ++anchors;
    const double l = margin + dist[a * m + hp] - dist[a * m + hn];
    if (l > 0.0) {
      total += l;
      active->push_back({a, hp, hn});
    }
  }
  const double count = anchors == 0 ? 1.0 : static_cast<double>(anchors);
  auto dist_ptr = std::make_shared<std::vector<double>>(std::move(dist));
  return g.record(Tensor::scalar(static_cast<real>(total / count)), {x},
                  [x, active, dist_ptr, m, n, count](Graph& g, const Tensor& dc) {
                    Tensor* d = g.grad_buffer(x);
                    if (!d) return;
                    const Tensor& xv = g.value(x);
                    const double s = dc[0] / count;
                    auto push = [&](std::size_t i, std::size_t j, double sign) {
                      const double dd = (*dist_ptr)[i * m + j];
                      for (std::size_t c = 0; c < n; ++c) {
                        const double u = (static_cast<double>(xv[i * n + c]) - xv[j * n + c]) / dd;
                        (*d)[i * n + c] += static_cast<real>(sign * s * u);
                        (*d)[j * n + c] -= static_cast<real>(sign * s * u);
                      }
                    };
                    for (const auto& t : *active) {
                      push(t.a, t.p, 1.0);
                      push(t.a, t.n, -1.0);
                    }
                  });
}

}  // namespace fed
