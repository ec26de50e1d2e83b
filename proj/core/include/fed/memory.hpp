// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fed/graph.hpp"

namespace fed {

enum class BankTag { PostOem, PostFdm };

std::string to_string(BankTag tag);

/// One feature center per identity, blended toward batch means each step:
///   c_k <- m * c_k + (1 - m) * mean(B_k)
class MemoryBank {
 public:
  static constexpr real kDefaultMomentum = 0.2f;

  MemoryBank() = default;
  MemoryBank(BankTag tag, Tensor centers, real momentum = kDefaultMomentum);

  /// Center k is the mean of features_by_id[k]; ids must cover 0..num_ids-1.
  static MemoryBank init(BankTag tag, const std::map<int, std::vector<std::vector<real>>>& features_by_id,
                         std::size_t num_ids, real momentum = kDefaultMomentum);

  bool initialized() const { return !centers_.empty(); }
  BankTag tag() const { return tag_; }
  real momentum() const { return momentum_; }
  std::size_t num_ids() const { return centers_.empty() ? 0 : centers_.rows(); }
  std::size_t dim() const { return centers_.empty() ? 0 : centers_.cols(); }
  const Tensor& centers() const { return centers_; }
  std::span<const real> center(std::size_t id) const { return centers_.row(id); }

  /// Rows of `features` ([B x dim]) labelled by `ids`; untouched identities
  /// keep their centers bit for bit.
  void update(const Tensor& features, const std::vector<int>& ids);

  /// K centers nearest to `query` by cosine similarity, excluding the query's
  /// own identity. Ties go to the lower identity index.
  std::vector<int> search(std::span<const real> query, int query_id, std::size_t k) const;

  /// Rows for the given identities stacked as [ids.size() x dim].
  Tensor gather(const std::vector<int>& ids) const;

 private:
  void check_id(int id) const;

  BankTag tag_ = BankTag::PostOem;
  Tensor centers_;
  real momentum_ = kDefaultMomentum;
};

enum class Similarity { Cosine, Dot };

std::string to_string(Similarity s);

/// Mean over rows of -log( exp(<f, c_y>/tau) / sum_j exp(<f, c_j>/tau) ),
/// centers held constant. With Cosine, f and every center are L2-normalized
/// first; Dot uses the raw inner product.
Var contrastive_loss(Graph& g, Var features, const MemoryBank& bank, const std::vector<int>& ids,
                     real temperature, Similarity similarity = Similarity::Cosine);

}  // namespace fed
