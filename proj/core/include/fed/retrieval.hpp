// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "fed/model.hpp"
#include "fed/synthetic.hpp"
#include "fed/tensor.hpp"

namespace fed {

struct EmbeddingIndex {
  Tensor vectors;  // [count x dim]
  std::vector<int> ids;
  std::vector<int> cameras;

  std::size_t size() const { return ids.size(); }
};

/// Inference embeddings (post-OEM, FDM unused) in chunks of `batch` images.
EmbeddingIndex embed(const std::vector<Sample>& samples, FedModel& model, bool oem_enabled = true,
                     std::size_t batch = 32);

/// Gallery indices by descending cosine similarity; equal scores keep index order.
std::vector<std::size_t> rank(std::span<const real> query, const EmbeddingIndex& gallery);

struct RankingResult {
  std::vector<std::vector<std::size_t>> rankings;
  std::vector<double> cmc;  // cmc[k-1] = Rank-k
  double map = 0.0;

  double rank_k(std::size_t k) const;
};

/// CMC and mAP from per-query rankings. Every query id needs a gallery match,
/// otherwise ProtocolError names the id.
RankingResult cmc_map(std::vector<std::vector<std::size_t>> rankings, const std::vector<int>& query_ids,
                      const std::vector<int>& gallery_ids);

/// Ranks every query against the gallery. With `cross_camera_only`, gallery
/// entries sharing the query's identity and camera are dropped from its list.
RankingResult evaluate(const EmbeddingIndex& query, const EmbeddingIndex& gallery, bool cross_camera_only = false);

struct EvalMetrics {
  double rank1 = 0.0;
  double rank5 = 0.0;
  double rank10 = 0.0;
  double map = 0.0;
};

EvalMetrics summarize(const RankingResult& result);
void write_eval_csv(const std::filesystem::path& path, const EvalMetrics& metrics);
/// One line per query: query index, then ranked gallery indices.
void write_rankings(const std::filesystem::path& path, const RankingResult& result);

}  // namespace fed
