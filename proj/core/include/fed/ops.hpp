// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "fed/graph.hpp"

// Differentiable operations recorded on a Graph. Matrices are rank-2 tensors
// (rows x cols); rank-1 tensors are treated as a single row.
namespace fed {

Var matmul(Graph& g, Var a, Var b);
/// a * b^T
Var matmul_nt(Graph& g, Var a, Var b);

Var add(Graph& g, Var a, Var b);
Var sub(Graph& g, Var a, Var b);
Var mul(Graph& g, Var a, Var b);
Var scale(Graph& g, Var a, real factor);
/// x[m x n] + bias[n], broadcast over rows.
Var add_bias(Graph& g, Var x, Var bias);
/// x[(b*t) x n] + tile[t x n], the tile repeated for every block of t rows.
Var add_tiled(Graph& g, Var x, Var tile);
/// x[m x n] * s[m x 1], each row scaled by its own scalar.
Var scale_rows(Graph& g, Var x, Var s);
/// x[m x (parts*c)] * s[m x parts]; column block j of row r scaled by s[r, j].
Var gate_parts(Graph& g, Var x, Var s);
/// Each row divided by sqrt(sum of squares + eps).
Var l2_normalize(Graph& g, Var x, real eps = 1e-12f);

Var sigmoid(Graph& g, Var x);
Var relu(Graph& g, Var x);
Var gelu(Graph& g, Var x);

/// Per-row normalization over the last extent followed by gain/bias.
Var layer_norm(Graph& g, Var x, Var gain, Var bias, real eps = 1e-5f);
/// Row-wise softmax with max subtraction.
Var softmax(Graph& g, Var x);

Var sum(Graph& g, Var x);
Var mean(Graph& g, Var x);

Var reshape(Graph& g, Var x, Shape shape);
Var concat_cols(Graph& g, const std::vector<Var>& parts);
Var concat_rows(Graph& g, const std::vector<Var>& parts);
Var slice_cols(Graph& g, Var x, std::size_t begin, std::size_t end);
/// Output row r is the mean of x's rows listed in groups[r].
Var gather_mean(Graph& g, Var x, const std::vector<std::vector<std::size_t>>& groups);

/// Scaled dot-product multi-head attention, batched in blocks.
/// q: [batch*tq x d], k and v: [batch*tk x d]. Block b of q attends only to
/// block b of k/v. Each head h works on columns [h*d/heads, (h+1)*d/heads).
/// When `weights` is given it receives the softmax weights laid out as
/// [batch][heads][tq][tk].
Var attention(Graph& g, Var q, Var k, Var v, std::size_t batch, std::size_t heads,
              std::vector<real>* weights = nullptr);

/// Mean over rows of -log softmax(logits)[label].
Var cross_entropy(Graph& g, Var logits, const std::vector<int>& labels);
/// Mean of squared differences against a constant target of the same shape.
Var mse(Graph& g, Var pred, const Tensor& target);
/// Batch-hard triplet loss on Euclidean distances, averaged over anchors that
/// have both a positive and a negative in the batch.
Var triplet_hard(Graph& g, Var x, const std::vector<int>& labels, real margin);

}  // namespace fed
