// SPDX-License-Identifier: Apache-2.0
#include "fed/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "fed/errors.hpp"

namespace fed {

EmbeddingIndex embed(const std::vector<Sample>& samples, FedModel& model, bool oem_enabled, std::size_t batch) {
  if (samples.empty()) throw ContractError("embed: no samples");
  if (batch == 0) throw ContractError("embed: batch must be positive");
  EmbeddingIndex index;
  index.vectors = Tensor::matrix(samples.size(), model.feature_dim());
  for (std::size_t start = 0; start < samples.size(); start += batch) {
    const std::size_t end = std::min(samples.size(), start + batch);
    std::vector<const Image*> imgs;
    for (std::size_t i = start; i < end; ++i) imgs.push_back(&samples[i].image);
    const Tensor f = model.embed(imgs, oem_enabled);
    std::copy(f.vec().begin(), f.vec().end(), index.vectors.row(start).begin());
  }
  for (const auto& s : samples) {
    index.ids.push_back(s.label);
    index.cameras.push_back(s.camera);
  }
  return index;
}

std::vector<std::size_t> rank(std::span<const real> query, const EmbeddingIndex& gallery) {
  if (gallery.size() == 0) throw ContractError("rank: empty gallery");
  if (query.size() != gallery.vectors.cols()) {
    throw DimensionError("rank: query dim " + std::to_string(query.size()) + " vs gallery dim " +
                         std::to_string(gallery.vectors.cols()));
  }
  double qn = 0.0;
  for (real v : query) qn += static_cast<double>(v) * v;
  qn = std::sqrt(qn);
  std::vector<double> sim(gallery.size());
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    const auto row = gallery.vectors.row(i);
    double dot = 0.0, gn = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      dot += static_cast<double>(query[j]) * row[j];
      gn += static_cast<double>(row[j]) * row[j];
    }
    const double denom = qn * std::sqrt(gn);
    sim[i] = denom > 0.0 ? dot / denom : 0.0;
  }
  std::vector<std::size_t> order(gallery.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&sim](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });
  return order;
}

double RankingResult::rank_k(std::size_t k) const {
  if (cmc.empty()) return 0.0;
  return cmc[std::min(k, cmc.size()) - 1];
}

RankingResult cmc_map(std::vector<std::vector<std::size_t>> rankings, const std::vector<int>& query_ids,
                      const std::vector<int>& gallery_ids) {
  if (rankings.size() != query_ids.size()) throw ContractError("cmc_map: rankings and query ids differ in length");
  if (rankings.empty()) throw ContractError("cmc_map: no queries");
  RankingResult out;
  out.cmc.assign(gallery_ids.size(), 0.0);
  double ap_sum = 0.0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    std::size_t hits = 0;
    double precision_sum = 0.0;
    std::size_t first = 0;
    for (std::size_t r = 0; r < rankings[q].size(); ++r) {
      const std::size_t gi = rankings[q][r];
      if (gi >= gallery_ids.size()) throw ContractError("cmc_map: gallery index out of range");
      if (gallery_ids[gi] != query_ids[q]) continue;
      if (hits == 0) first = r;
      ++hits;
      precision_sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
    if (hits == 0) throw ProtocolError("cmc_map: query id " + std::to_string(query_ids[q]) + " has no gallery match");
    for (std::size_t k = first; k < out.cmc.size(); ++k) out.cmc[k] += 1.0;
    ap_sum += precision_sum / static_cast<double>(hits);
  }
  const auto nq = static_cast<double>(rankings.size());
  for (double& c : out.cmc) c /= nq;
  out.map = ap_sum / nq;
  out.rankings = std::move(rankings);
  return out;
}

RankingResult evaluate(const EmbeddingIndex& query, const EmbeddingIndex& gallery, bool cross_camera_only) {
  std::vector<std::vector<std::size_t>> rankings;
  for (std::size_t q = 0; q < query.size(); ++q) {
    auto order = rank(query.vectors.row(q), gallery);
    if (cross_camera_only) {
      std::erase_if(order, [&](std::size_t g) {
        return gallery.ids[g] == query.ids[q] && gallery.cameras[g] == query.cameras[q];
      });
    }
    rankings.push_back(std::move(order));
  }
  return cmc_map(std::move(rankings), query.ids, gallery.ids);
}

EvalMetrics summarize(const RankingResult& r) {
  return {r.rank_k(1), r.rank_k(5), r.rank_k(10), r.map};
}

void write_eval_csv(const std::filesystem::path& path, const EvalMetrics& m) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  char buf[160];
  std::snprintf(buf, sizeof buf, "metric,value\nrank1,%.17g\nrank5,%.17g\nrank10,%.17g\nmap,%.17g\n", m.rank1,
                m.rank5, m.rank10, m.map);
  f << buf;
  if (!f) throw IoError("write failed for " + path.string());
}

void write_rankings(const std::filesystem::path& path, const RankingResult& result) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  for (std::size_t q = 0; q < result.rankings.size(); ++q) {
    f << q;
    for (std::size_t g : result.rankings[q]) f << ',' << g;
    f << '\n';
  }
  if (!f) throw IoError("write failed for " + path.string());
}

}  // namespace fed
