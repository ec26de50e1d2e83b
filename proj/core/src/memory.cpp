// SPDX-License-Identifier: Apache-2.0
#include "fed/memory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fed/errors.hpp"
#include "fed/ops.hpp"

namespace fed {

std::string to_string(BankTag tag) { return tag == BankTag::PostOem ? "oem" : "fdm"; }

std::string to_string(Similarity s) { return s == Similarity::Cosine ? "cosine" : "dot"; }

MemoryBank::MemoryBank(BankTag tag, Tensor centers, real momentum)
    : tag_(tag), centers_(std::move(centers)), momentum_(momentum) {
  if (momentum < 0.0f || momentum > 1.0f) throw ConfigError("memory momentum must lie in [0, 1]");
  if (centers_.rank() != 2) throw DimensionError("memory centers must be a matrix");
}

MemoryBank MemoryBank::init(BankTag tag, const std::map<int, std::vector<std::vector<real>>>& features_by_id,
                            std::size_t num_ids, real momentum) {
  if (num_ids == 0) throw StateError("memory init: no identities");
  std::size_t dim = 0;
  for (std::size_t k = 0; k < num_ids; ++k) {
    auto it = features_by_id.find(static_cast<int>(k));
    if (it == features_by_id.end() || it->second.empty()) {
      throw StateError("memory init: identity " + std::to_string(k) + " has no features");
    }
    if (dim == 0) dim = it->second.front().size();
  }
  if (dim == 0) throw StateError("memory init: zero-length features");
  Tensor centers = Tensor::matrix(num_ids, dim);
  std::vector<double> acc(dim);
  for (std::size_t k = 0; k < num_ids; ++k) {
    const auto& feats = features_by_id.at(static_cast<int>(k));
    std::fill(acc.begin(), acc.end(), 0.0);
    for (const auto& f : feats) {
      if (f.size() != dim) throw DimensionError("memory init: inconsistent feature length");
      for (std::size_t c = 0; c < dim; ++c) acc[c] += f[c];
    }
    for (std::size_t c = 0; c < dim; ++c) {
      centers.at(k, c) = static_cast<real>(acc[c] / static_cast<double>(feats.size()));
    }
  }
  return MemoryBank(tag, std::move(centers), momentum);
}

void MemoryBank::check_id(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= num_ids()) {
    throw ContractError("identity " + std::to_string(id) + " is not in the memory bank");
  }
}

void MemoryBank::update(const Tensor& features, const std::vector<int>& ids) {
  if (!initialized()) throw StateError("memory bank used before initialization");
  if (features.rows() != ids.size() || features.cols() != dim()) {
    throw DimensionError("memory update: features " + shape_string(features.shape()) + " for " +
                         std::to_string(ids.size()) + " ids, bank dim " + std::to_string(dim()));
  }
  for (int id : ids) check_id(id);
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t r = 0; r < ids.size(); ++r) groups[ids[r]].push_back(r);
  std::vector<double> acc(dim());
  for (const auto& [id, rows] : groups) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t r : rows) {
      for (std::size_t c = 0; c < dim(); ++c) acc[c] += features.at(r, c);
    }
    const double inv = 1.0 / static_cast<double>(rows.size());
    auto center = centers_.row(static_cast<std::size_t>(id));
    for (std::size_t c = 0; c < dim(); ++c) {
      center[c] = static_cast<real>(momentum_ * static_cast<double>(center[c]) +
                                     (1.0 - momentum_) * acc[c] * inv);
    }
  }
}

std::vector<int> MemoryBank::search(std::span<const real> query, int query_id, std::size_t k) const {
  if (!initialized()) throw StateError("memory bank used before initialization");
  if (k == 0 || k >= num_ids()) {
    throw ConfigError("memory search K=" + std::to_string(k) + " must lie in [1, " +
                      std::to_string(num_ids()) + ")");
  }
  if (query.size() != dim()) throw DimensionError("memory search: query length mismatch");
  check_id(query_id);
  double qn = 0.0;
  for (real v : query) qn += static_cast<double>(v) * v;
  qn = std::sqrt(qn);
  std::vector<std::pair<double, int>> scored;
  for (std::size_t j = 0; j < num_ids(); ++j) {
    if (static_cast<int>(j) == query_id) continue;
    const auto c = centers_.row(j);
    double dot = 0.0, cn = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) {
      dot += static_cast<double>(query[i]) * c[i];
      cn += static_cast<double>(c[i]) * c[i];
    }
    const double denom = qn * std::sqrt(cn);
    scored.emplace_back(denom > 0.0 ? dot / denom : 0.0, static_cast<int>(j));
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<int> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(scored[i].second);
  return out;
}

Tensor MemoryBank::gather(const std::vector<int>& ids) const {
  Tensor out = Tensor::matrix(ids.size(), dim());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    check_id(ids[r]);
    const auto c = centers_.row(static_cast<std::size_t>(ids[r]));
    std::copy(c.begin(), c.end(), out.row(r).begin());
  }
  return out;
}

Var contrastive_loss(Graph& g, Var features, const MemoryBank& bank, const std::vector<int>& ids,
                     real temperature, Similarity similarity) {
  if (!(temperature > 0.0f)) throw ConfigError("contrastive temperature must be positive");
  if (!bank.initialized()) throw StateError("memory bank used before initialization");
  Var f = features;
  Tensor centers = bank.centers();
  if (similarity == Similarity::Cosine) {
    f = l2_normalize(g, features);
    Graph scratch(false);
    centers = scratch.value(l2_normalize(scratch, scratch.constant(std::move(centers))));
  }
  Var logits = scale(g, matmul_nt(g, f, g.constant(std::move(centers))), 1.0f / temperature);
  return cross_entropy(g, logits, ids);
}

}  // namespace fed
