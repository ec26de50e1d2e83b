// SPDX-License-Identifier: Apache-2.0
// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on failure.
// Usage: fed_acceptance [criterion numbers...]   (default: all)
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "criteria.hpp"
#include "fed/checkpoint.hpp"
#include "fed/experiment.hpp"
#include "fed/memory.hpp"
#include "fed/ops.hpp"
#include "fed/npo.hpp"
#include "fed/retrieval.hpp"
#include "fed/training.hpp"
#include "oracles.hpp"

namespace acceptance {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

fed::Tensor random_tensor(fed::Shape shape, fed::Rng& rng, double lo = -1.0, double hi = 1.0) {
  fed::Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<fed::real>(rng.uniform(lo, hi));
  return t;
}

// --- 2: mask oracle --------------------------------------------------------

Verdict mask_oracle() {
  const auto t0 = Clock::now();
  const auto patches = fed::generate_patch_set(30, 2024);
  const auto data = fed::generate_dataset(10, 5, 64, 32, 2024);
  std::size_t horizontal = 0, vertical = 0, mismatches = 0, partial = 0;
  for (std::uint64_t seed = 1; seed <= 500; ++seed) {
    fed::Rng rng(seed);
    const auto& x = data[(seed - 1) % data.size()].image;
    const auto p = fed::augment_pair(x, patches, rng);
    if (p.orientation == fed::Orientation::Vertical) {
      ++vertical;
      if (!(p.mask == fed::OcclusionMask::all_visible())) ++mismatches;
    } else {
      ++horizontal;
      const auto want = fed::test::mask_oracle(p.original, p.occluded, p.orientation);
      if (!(p.mask == want)) ++mismatches;
      if (std::count(p.mask.stripes.begin(), p.mask.stripes.end(), 0) > 0) ++partial;
    }
  }
  const double t = seconds_since(t0);
  const bool ok = mismatches == 0 && horizontal > 0 && vertical > 0 && t < 10.0;
  return {ok, fmt("500 draws (%zu horizontal, %zu with occluded stripes, %zu vertical), %zu mismatches, %.2f s",
                  horizontal, partial, vertical, mismatches, t)};
}

// --- 3: memory semantics -----------------------------------------------------

Verdict memory_semantics() {
  const auto t0 = Clock::now();
  fed::Rng rng(303);
  double worst_update = 0.0;
  std::size_t search_mismatch = 0, self_hits = 0, queries = 0;
  for (int bank_i = 0; bank_i < 200; ++bank_i) {
    const std::size_t ids = 2 + static_cast<std::size_t>(rng.uniform_int(0, 38));
    const std::size_t dim = 4 + static_cast<std::size_t>(rng.uniform_int(0, 60));
    const fed::Tensor centers = random_tensor({ids, dim}, rng);
    fed::MemoryBank bank(fed::BankTag::PostOem, centers, 0.2f);

    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform_int(0, 15));
    const fed::Tensor batch = random_tensor({n, dim}, rng);
    std::vector<int> bid(n);
    for (auto& v : bid) v = static_cast<int>(rng.uniform_int(0, static_cast<int>(ids) - 1));
    bank.update(batch, bid);
    const fed::Tensor want = fed::test::memory_update_oracle(centers, batch, bid, 0.2);
    for (std::size_t i = 0; i < want.numel(); ++i) {
      worst_update = std::max(worst_update, std::abs(static_cast<double>(bank.centers()[i]) - want[i]));
    }

    for (int q = 0; q < 5; ++q) {
      std::vector<fed::real> query(dim);
      for (auto& v : query) v = static_cast<fed::real>(rng.uniform(-1, 1));
      const int own = static_cast<int>(rng.uniform_int(0, static_cast<int>(ids) - 1));
      const std::size_t k = 1 + static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(ids) - 2));
      const auto got = bank.search(query, own, k);
      ++queries;
      if (got != fed::test::search_oracle(bank.centers(), query, own, k)) ++search_mismatch;
      if (std::find(got.begin(), got.end(), own) != got.end()) ++self_hits;
    }
  }
  const double t = seconds_since(t0);
  const bool ok = worst_update <= 1e-6 && search_mismatch == 0 && self_hits == 0 && t < 10.0;
  return {ok, fmt("200 banks: worst update error %.2e, %zu/%zu search mismatches, %zu self hits, %.2f s",
                  worst_update, search_mismatch, queries, self_hits, t)};
}

// --- 4: FDM contracts ---------------------------------------------------------

Verdict fdm_contracts() {
  const fed::RunConfig cfg;
  fed::FedModel model(cfg, 404);
  fed::Rng rng(404);
  const std::size_t dim = model.feature_dim();
  fed::MemoryBank bank(fed::BankTag::PostOem, random_tensor({cfg.data.ids, dim}, rng));
  const std::size_t b = 6;
  const fed::Tensor fp = random_tensor({b, dim}, rng);
  const fed::Tensor scores = random_tensor({b, fed::kParts}, rng, 0.0, 1.0);
  std::vector<int> ids;
  for (std::size_t i = 0; i < b; ++i) ids.push_back(static_cast<int>(i * 3 % cfg.data.ids));

  // attention weights
  std::vector<fed::real> weights;
  fed::Graph g(false);
  fed::Var f = g.constant(fp);
  g.value(model.fdm.forward(g, f, g.constant(scores), bank, ids, &weights));
  double worst_sum = 0.0;
  const std::size_t rows = weights.size() / cfg.k;
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < cfg.k; ++j) s += weights[r * cfg.k + j];
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
  }

  // gate endpoints
  const fed::Tensor closed = g.value(model.fdm.forward(g, f, g.constant(fed::Tensor({b, fed::kParts}, 0.0f)), bank, ids));
  const fed::Tensor open = g.value(model.fdm.forward(g, f, g.constant(fed::Tensor({b, fed::kParts}, 1.0f)), bank, ids));
  const bool closed_ok = closed.identical(g.value(model.fdm.ffn2(g, f)));
  fed::Var att = model.fdm.cross_attention(g, f, model.fdm.select_centers(fp, bank, ids), b);
  const bool open_ok = open.identical(g.value(model.fdm.ffn2(g, fed::add(g, model.fdm.ffn1(g, att, f), f))));

  // inference independence from FDM parameters
  const auto data = fed::generate_dataset(4, 2, cfg.encoder.height, cfg.encoder.width, 404);
  std::vector<const fed::Image*> imgs;
  for (const auto& s : data) imgs.push_back(&s.image);
  const fed::Tensor before = model.embed(imgs, true);
  std::vector<fed::Parameter*> fdm_params;
  model.fdm.collect(fdm_params);
  for (auto* p : fdm_params) p->value = random_tensor(p->value.shape(), rng, -3.0, 3.0);
  const bool independent = before.identical(model.embed(imgs, true));

  const bool ok = worst_sum <= 1e-6 && closed_ok && open_ok && independent;
  return {ok, fmt("%zu head rows, worst |sum-1| %.2e; gate 0 %s, gate 1 %s; inference %s", rows, worst_sum,
                  closed_ok ? "bitwise" : "MISMATCH", open_ok ? "bitwise" : "MISMATCH",
                  independent ? "unchanged" : "CHANGED")};
}

// --- 5 and 9: loss assembly and determinism ----------------------------------

fed::RunConfig smoke_config() {
  fed::RunConfig c;
  c.train.epochs = 2;
  return c;
}

struct SmokeRun {
  std::string checkpoint;
  std::string metrics_csv;
  std::string eval_csv;
  std::vector<fed::LossBreakdown> breakdowns;
  std::vector<fed::MetricsRow> rows;
};

SmokeRun smoke_run() {
  const fed::RunConfig c = smoke_config();
  auto out = fed::run_experiment(c);
  SmokeRun r;
  r.checkpoint = fed::encode_checkpoint(out.training.state.checkpoint());
  std::ostringstream m;
  m << fed::kMetricsHeader << "\n";
  for (const auto& row : out.training.rows) m << fed::format_metrics_row(row) << "\n";
  r.metrics_csv = m.str();
  r.eval_csv = fmt("metric,value\nrank1,%.17g\nrank5,%.17g\nrank10,%.17g\nmap,%.17g\n", out.metrics.rank1,
                   out.metrics.rank5, out.metrics.rank10, out.metrics.map);
  r.breakdowns = std::move(out.training.breakdowns);
  r.rows = std::move(out.training.rows);
  return r;
}

std::optional<SmokeRun> first_smoke;

Verdict loss_assembly() {
  first_smoke = smoke_run();
  const SmokeRun& r = *first_smoke;
  // re-read the logged values from the CSV text, as a user of the file would
  std::istringstream in(r.metrics_csv);
  std::string line;
  std::getline(in, line);
  double worst = 0.0;
  std::size_t steps = 0, bad_terms = 0;
  while (std::getline(in, line)) {
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) v.push_back(std::strtod(cell.c_str(), nullptr));
    const double recomposed = 0.5 * (v[4] + v[5] + v[6]);
    worst = std::max(worst, std::abs(v[3] - recomposed));
    const auto& b = r.breakdowns.at(steps);
    std::size_t finite = 0;
    for (const auto& t : b.terms) finite += std::isfinite(t.value) ? 1 : 0;
    if (b.terms.size() != 12 || finite != 12) ++bad_terms;
    ++steps;
  }
  const bool ok = steps > 0 && steps == r.rows.size() && worst <= 1e-6 && bad_terms == 0;
  return {ok, fmt("%zu steps over 2 epochs, worst |total - components| %.2e, %zu steps without 12 finite terms",
                  steps, worst, bad_terms)};
}

Verdict determinism() {
  if (!first_smoke) first_smoke = smoke_run();
  const SmokeRun second = smoke_run();
  const bool ckpt = first_smoke->checkpoint == second.checkpoint;
  const bool metrics = first_smoke->metrics_csv == second.metrics_csv;
  const bool eval = first_smoke->eval_csv == second.eval_csv;
  return {ckpt && metrics && eval,
          fmt("checkpoint (%zu bytes) %s, metrics.csv %s, eval.csv %s", second.checkpoint.size(),
              ckpt ? "identical" : "DIFFERS", metrics ? "identical" : "DIFFERS", eval ? "identical" : "DIFFERS")};
}

// --- 6 and 7: trained-model criteria ----------------------------------------

// Ablation rows train longer than the default: the occlusion-augmented rows
// are still underfit at 20 epochs and the comparison would mostly measure that.
constexpr std::size_t kAblationEpochs = 40;

const std::vector<std::string> kOrderedRows{"baseline", "+NPO", "+NPO+OEM", "+NPO+FDM", "full"};

fed::AblationRow find_row(const std::string& name) {
  for (const auto& row : fed::ablation_rows()) {
    if (row.name == name) return row;
  }
  throw std::logic_error("no ablation row " + name);
}

Verdict oem_directional() {
  std::vector<double> gaps;
  std::string per_seed;
  const fed::RunConfig base;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    fed::RunConfig c = fed::with_components(base, find_row("full").components);
    c.seed = seed;
    const auto ex = fed::make_experiment(c);
    auto run = fed::train(ex.train, c);
    // held out: gallery images of unseen ids, occluded with the eval patch set
    const auto patches = fed::generate_patch_set(c.data.patches, fed::derive_seed(seed, "eval-patches"));
    const auto s = fed::inspect_scores(run.state.model, ex.eval.gallery, patches, fed::derive_seed(seed, "inspect"));
    gaps.push_back(s.mean_visible - s.mean_occluded);
    per_seed += fmt("%s%.3f/%.3f", per_seed.empty() ? "" : ", ", s.mean_occluded, s.mean_visible);
    std::printf("  seed %llu mask-0 %.3f mask-1 %.3f\n", static_cast<unsigned long long>(seed), s.mean_occluded,
                s.mean_visible);
    std::fflush(stdout);
  }
  const double gap = median3(gaps);
  return {gap > 0.0, fmt("%zu epochs, mask-0/mask-1 mean score per seed: %s; median gap %.4f", base.train.epochs,
                         per_seed.c_str(), gap)};
}

Verdict ablation_ordering() {
  const auto t0 = Clock::now();
  std::map<std::string, std::vector<double>> rank1;
  const fed::RunConfig base;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    for (const auto& name : kOrderedRows) {
      fed::RunConfig c = fed::with_components(base, find_row(name).components);
      c.seed = seed;
      c.train.epochs = kAblationEpochs;
      const auto out = fed::run_experiment(c);
      rank1[name].push_back(out.metrics.rank1);
      std::printf("  seed %llu %-9s rank1 %.3f map %.3f\n", static_cast<unsigned long long>(seed), name.c_str(),
                  out.metrics.rank1, out.metrics.map);
      std::fflush(stdout);
    }
  }
  const double seconds = seconds_since(t0);
  std::map<std::string, double> m;
  for (const auto& name : kOrderedRows) m[name] = median3(rank1.at(name));
  const bool order = m["baseline"] <= m["+NPO"] && m["+NPO"] <= m["full"] && m["full"] >= m["+NPO+OEM"] &&
                     m["full"] >= m["+NPO+FDM"];
  const bool fast = seconds < 45.0 * 60.0;
  return {order && fast,
          fmt("%zu epochs, median Rank-1 baseline %.3f, +NPO %.3f, +NPO+OEM %.3f, +NPO+FDM %.3f, full %.3f; %.0f s",
              kAblationEpochs, m["baseline"], m["+NPO"], m["+NPO+OEM"], m["+NPO+FDM"], m["full"], seconds)};
}

// --- 8: cmc / mAP ---------------------------------------------------------------

Verdict cmc_map() {
  const auto worked = fed::cmc_map({{0, 1, 2, 3}}, {7}, {7, 8, 7, 9});
  const bool worked_ok = std::abs(worked.map - 5.0 / 6.0) <= 1e-9;
  fed::Rng rng(808);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t ng = 2 + static_cast<std::size_t>(rng.uniform_int(0, 40));
    const std::size_t nq = 1 + static_cast<std::size_t>(rng.uniform_int(0, 12));
    const int nid = 1 + static_cast<int>(rng.uniform_int(0, 6));
    std::vector<int> gids(ng), qids(nq);
    for (auto& v : gids) v = static_cast<int>(rng.uniform_int(0, nid - 1));
    for (auto& v : qids) v = gids[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(ng) - 1))];
    std::vector<std::vector<std::size_t>> rankings(nq);
    for (auto& r : rankings) {
      r.resize(ng);
      for (std::size_t i = 0; i < ng; ++i) r[i] = i;
      for (std::size_t i = ng - 1; i > 0; --i) {
        std::swap(r[i], r[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i)))]);
      }
    }
    const auto got = fed::cmc_map(rankings, qids, gids);
    const auto want = fed::test::cmc_map_oracle(rankings, qids, gids);
    worst = std::max(worst, std::abs(got.map - want.map));
    for (std::size_t k = 0; k < ng; ++k) worst = std::max(worst, std::abs(got.cmc[k] - want.cmc[k]));
  }
  return {worked_ok && worst <= 1e-9,
          fmt("worked example AP %.12f (want 5/6); 100 random instances, worst error %.2e", worked.map, worst)};
}

Verdict timed_gradients() {
  const auto t0 = Clock::now();
  Verdict v = gradient_suite();
  const double t = seconds_since(t0);
  v.pass = v.pass && t < 60.0;
  v.detail += fmt(", %.1f s", t);
  return v;
}

}  // namespace
}  // namespace acceptance

int main(int argc, char** argv) {
  using namespace acceptance;
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"gradient suite", timed_gradients},  {"mask oracle", mask_oracle},
      {"memory semantics", memory_semantics}, {"FDM contracts", fdm_contracts},
      {"loss assembly", loss_assembly},      {"OEM directional", oem_directional},
      {"ablation ordering", ablation_ordering}, {"cmc_map", cmc_map},
      {"determinism", determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i + 1);
    if (!wanted.empty() && !wanted.count(number)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s %d %s: %s\n", v.pass ? "PASS" : "FAIL", number, criteria[i].first.c_str(), v.detail.c_str());
    std::fflush(stdout);
    failures += v.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
