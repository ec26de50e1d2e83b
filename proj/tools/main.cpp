// SPDX-License-Identifier: Apache-2.0
// fed: train, evaluate and inspect the occluded re-identification pipeline.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fed/checkpoint.hpp"
#include "fed/config.hpp"
#include "fed/errors.hpp"
#include "fed/experiment.hpp"
#include "fed/npo.hpp"
#include "fed/retrieval.hpp"
#include "fed/rng.hpp"
#include "fed/runtime.hpp"
#include "fed/training.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitLoad = 4;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "fed-run";
  std::string checkpoint;
  std::optional<std::size_t> k;
  std::string mse;
  bool cross_camera_only = false;

  // subcommand arguments
  std::size_t count = 8;
  std::vector<std::size_t> k_values{1, 2, 4, 8, 12, 16};
  std::size_t seeds = 3;
};

fed::RunConfig resolve_config(const Options& o) {
  fed::RunConfig c = o.config.empty() ? fed::RunConfig{} : fed::load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.k) c.k = *o.k;
  if (!o.mse.empty()) c.train.components.mse = o.mse == "on";
  if (o.cross_camera_only) c.cross_camera_only = true;
  c.validate();
  return c;
}

std::string run_id(const fed::RunConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fed::derive_seed(c.seed, fed::format_config(c))));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw fed::IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw fed::IoError("write failed for " + path.string());
}

// Creates the output directory and records what is about to run. Nothing
// else is written before this.
void write_manifest(const fs::path& out, const std::string& command, const fed::RunConfig& c,
                    const Options& o) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw fed::IoError("cannot create output directory " + out.string() + ": " + ec.message());
  nlohmann::ordered_json m;
  m["run_id"] = run_id(c);
  m["command"] = command;
  m["seed"] = c.seed;
  m["config"] = fed::format_config(c);
  if (!o.checkpoint.empty()) m["checkpoint"] = o.checkpoint;
  write_text(out / "manifest.json", m.dump(2) + "\n");
}

fs::path checkpoint_path(const Options& o) {
  return o.checkpoint.empty() ? fs::path(o.out) / "model.fedc" : fs::path(o.checkpoint);
}

fed::FedModel load_model(const fed::RunConfig& c, const Options& o) {
  if (o.checkpoint.empty()) throw fed::ConfigError("--checkpoint is required");
  fed::FedModel model(c, c.seed);
  model.load_state(fed::read_checkpoint(o.checkpoint));
  return model;
}

void print_metrics(const fed::EvalMetrics& m) {
  std::printf("rank1=%.4f rank5=%.4f rank10=%.4f map=%.4f\n", m.rank1, m.rank5, m.rank10, m.map);
}

int cmd_train(const Options& o) {
  const fed::RunConfig c = resolve_config(o);
  const fs::path out(o.out);
  write_manifest(out, "train", c, o);
  const fed::Experiment ex = fed::make_experiment(c);
  std::ofstream metrics(out / "metrics.csv", std::ios::trunc);
  if (!metrics) throw fed::IoError("cannot open " + (out / "metrics.csv").string());
  metrics << fed::kMetricsHeader << "\n";
  fed::TrainResult tr = fed::train(ex.train, c, [&](const fed::MetricsRow& row, const fed::LossBreakdown&) {
    metrics << fed::format_metrics_row(row) << "\n";
    if (row.step % 20 == 0) {
      std::fprintf(stderr, "epoch %zu step %zu loss %.4f\n", row.epoch, row.step, row.total);
    }
  });
  metrics.flush();
  if (!metrics) throw fed::IoError("write failed for " + (out / "metrics.csv").string());
  fed::write_checkpoint(checkpoint_path(o), tr.state.checkpoint());
  std::printf("run %s: %zu steps, checkpoint %s\n", run_id(c).c_str(), tr.rows.size(),
              checkpoint_path(o).string().c_str());
  return 0;
}

int cmd_eval(const Options& o) {
  const fed::RunConfig c = resolve_config(o);
  const fs::path out(o.out);
  write_manifest(out, "eval", c, o);
  fed::FedModel model = load_model(c, o);
  const fed::Experiment ex = fed::make_experiment(c);
  const fed::RankingResult r = fed::evaluate_model(model, ex, c);
  const fed::EvalMetrics m = fed::summarize(r);
  fed::write_eval_csv(out / "eval.csv", m);
  fed::write_rankings(out / "rankings.txt", r);
  print_metrics(m);
  return 0;
}

int cmd_augment_preview(const Options& o) {
  const fed::RunConfig c = resolve_config(o);
  const fs::path out(o.out);
  write_manifest(out, "augment-preview", c, o);
  const fed::Experiment ex = fed::make_experiment(c);
  const auto patches = fed::generate_patch_set(c.data.patches, fed::derive_seed(c.seed, "patches"));
  fed::Rng rng(fed::derive_seed(c.seed, "preview"));
  std::ostringstream index;
  index << "index,sample,label,orientation,m1,m2,m3,m4\n";
  for (std::size_t i = 0; i < o.count; ++i) {
    const std::size_t s = i % ex.train.size();
    const auto pair = fed::augment_pair(ex.train[s].image, patches, rng);
    fed::write_ppm(out / ("pair_" + std::to_string(i) + "_holistic.ppm"), pair.original);
    fed::write_ppm(out / ("pair_" + std::to_string(i) + "_occluded.ppm"), pair.occluded);
    index << i << "," << s << "," << ex.train[s].label << "," << fed::to_string(pair.orientation);
    for (int v : pair.mask.stripes) index << "," << v;
    index << "\n";
  }
  write_text(out / "preview.csv", index.str());
  std::printf("wrote %zu pairs to %s\n", o.count, out.string().c_str());
  return 0;
}

int cmd_inspect_scores(const Options& o) {
  const fed::RunConfig c = resolve_config(o);
  const fs::path out(o.out);
  write_manifest(out, "inspect-scores", c, o);
  fed::FedModel model = load_model(c, o);
  const fed::Experiment ex = fed::make_experiment(c);
  const auto patches = fed::generate_patch_set(c.data.patches, fed::derive_seed(c.seed, "eval-patches"));
  const auto summary = fed::inspect_scores(model, ex.eval.gallery, patches, fed::derive_seed(c.seed, "inspect"));
  std::ostringstream csv;
  csv << "sample,orientation,stripe,mask,score\n";
  char buf[64];
  for (const auto& r : summary.records) {
    for (std::size_t s = 0; s < fed::kStripes; ++s) {
      std::snprintf(buf, sizeof buf, "%.9g", r.scores[s]);
      csv << r.sample << "," << fed::to_string(r.orientation) << "," << s + 1 << "," << r.mask.stripes[s] << ","
          << buf << "\n";
    }
  }
  write_text(out / "scores.csv", csv.str());
  std::printf("mask-0 stripes: n=%zu mean=%.4f\nmask-1 stripes: n=%zu mean=%.4f\n", summary.occluded,
              summary.mean_occluded, summary.visible, summary.mean_visible);
  return 0;
}

int cmd_sweep_k(const Options& o) {
  const fed::RunConfig base = resolve_config(o);
  const fs::path out(o.out);
  write_manifest(out, "sweep-k", base, o);
  std::ostringstream csv;
  csv << "k,rank1,rank5,rank10,map\n";
  char buf[160];
  for (std::size_t k : o.k_values) {
    fed::RunConfig c = base;
    c.k = k;
    c.validate();
    const auto m = fed::run_experiment(c).metrics;
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", k, m.rank1, m.rank5, m.rank10, m.map);
    csv << buf;
    std::printf("k=%zu ", k);
    print_metrics(m);
  }
  write_text(out / "sweep_k.csv", csv.str());
  return 0;
}

int cmd_ablate(const Options& o) {
  const fed::RunConfig base = resolve_config(o);
  const fs::path out(o.out);
  write_manifest(out, "ablate", base, o);
  std::ostringstream csv;
  csv << "row,seed,rank1,rank5,rank10,map\n";
  char buf[200];
  for (std::size_t s = 0; s < o.seeds; ++s) {
    for (const auto& row : fed::ablation_rows()) {
      fed::RunConfig c = fed::with_components(base, row.components);
      c.seed = base.seed + s;
      const auto m = fed::run_experiment(c).metrics;
      std::snprintf(buf, sizeof buf, "%s,%llu,%.17g,%.17g,%.17g,%.17g\n", row.name.c_str(),
                    static_cast<unsigned long long>(c.seed), m.rank1, m.rank5, m.rank10, m.map);
      csv << buf;
      std::printf("%-9s seed=%llu ", row.name.c_str(), static_cast<unsigned long long>(c.seed));
      print_metrics(m);
    }
  }
  write_text(out / "ablation.csv", csv.str());
  return 0;
}

int cmd_dump_dataset(const Options& o) {
  const fed::RunConfig c = resolve_config(o);
  const fs::path out(o.out);
  write_manifest(out, "dump-dataset", c, o);
  const fed::Experiment ex = fed::make_experiment(c);
  std::ostringstream csv;
  csv << "split,index,label,camera,file\n";
  auto dump = [&](const std::string& split, const std::vector<fed::Sample>& samples) {
    fs::create_directories(out / split);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const std::string file = split + "/" + std::to_string(i) + ".ppm";
      fed::write_ppm(out / file, samples[i].image);
      csv << split << "," << i << "," << samples[i].label << "," << samples[i].camera << "," << file << "\n";
    }
  };
  dump("train", ex.train);
  dump("query", ex.eval.query);
  dump("gallery", ex.eval.gallery);
  write_text(out / "dataset.csv", csv.str());
  std::printf("train=%zu query=%zu gallery=%zu\n", ex.train.size(), ex.eval.query.size(), ex.eval.gallery.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FED occluded person re-identification on synthetic data"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "key = value config file");
  app.add_option("--seed", o.seed, "overrides the config seed");
  app.add_option("--out", o.out, "output directory")->capture_default_str();
  app.add_option("--checkpoint", o.checkpoint, "checkpoint to write (train) or read");
  app.add_option("--k", o.k, "FDM neighbours");
  app.add_option("--mse", o.mse, "OEM mask supervision")->check(CLI::IsMember({"on", "off"}));
  app.add_flag("--cross-camera-only", o.cross_camera_only, "drop same-camera true matches from galleries");

  auto* train = app.add_subcommand("train", "train a model, write metrics.csv and a checkpoint");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint, write eval.csv");
  auto* preview = app.add_subcommand("augment-preview", "write occlusion pairs and masks");
  preview->add_option("--count", o.count, "pairs to write")->capture_default_str();
  auto* scores = app.add_subcommand("inspect-scores", "compare OEM scores with generated masks");
  auto* sweep = app.add_subcommand("sweep-k", "train and evaluate for several k");
  sweep->add_option("--values", o.k_values, "k values")->delimiter(',');
  auto* ablate = app.add_subcommand("ablate", "run every ablation row");
  ablate->add_option("--seeds", o.seeds, "seeds per row, counting up from --seed")->capture_default_str();
  auto* dump = app.add_subcommand("dump-dataset", "write the synthetic splits as PPM images");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (const auto threads = fed::threads_from_env()) fed::set_threads(*threads);
    if (train->parsed()) return cmd_train(o);
    if (eval->parsed()) return cmd_eval(o);
    if (preview->parsed()) return cmd_augment_preview(o);
    if (scores->parsed()) return cmd_inspect_scores(o);
    if (sweep->parsed()) return cmd_sweep_k(o);
    if (ablate->parsed()) return cmd_ablate(o);
    if (dump->parsed()) return cmd_dump_dataset(o);
  } catch (const fed::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const fed::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const fed::LoadError& e) {
    std::fprintf(stderr, "checkpoint error: %s\n", e.what());
    return kExitLoad;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
