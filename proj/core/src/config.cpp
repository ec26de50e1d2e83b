// SPDX-License-Identifier: Apache-2.0
#include "fed/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "fed/errors.hpp"

namespace fed {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t parse_count(const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& v) {
  std::istringstream in(v);
  in.imbue(std::locale::classic());
  double out = 0.0;
  in >> out;
  if (!in || !in.eof()) throw ConfigError("expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw ConfigError("expected true/false, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_u64(v); }},
      {"preset",
       [](RunConfig& c, const std::string& v) {
         if (v == "paper") {
           c.encoder = EncoderConfig::paper_scale();
         } else if (v == "desk") {
           c.encoder = EncoderConfig{};
         } else {
           throw ConfigError("preset must be 'desk' or 'paper', got '" + v + "'");
         }
       }},
      {"ids", [](RunConfig& c, const std::string& v) { c.data.ids = parse_count(v); }},
      {"eval_ids", [](RunConfig& c, const std::string& v) { c.data.eval_ids = parse_count(v); }},
      {"per_id", [](RunConfig& c, const std::string& v) { c.data.per_id = parse_count(v); }},
      {"eval_per_id", [](RunConfig& c, const std::string& v) { c.data.eval_per_id = parse_count(v); }},
      {"patches", [](RunConfig& c, const std::string& v) { c.data.patches = parse_count(v); }},
      {"height", [](RunConfig& c, const std::string& v) { c.encoder.height = parse_count(v); }},
      {"width", [](RunConfig& c, const std::string& v) { c.encoder.width = parse_count(v); }},
      {"patch", [](RunConfig& c, const std::string& v) { c.encoder.patch = parse_count(v); }},
      {"depth", [](RunConfig& c, const std::string& v) { c.encoder.depth = parse_count(v); }},
      {"channels", [](RunConfig& c, const std::string& v) { c.encoder.channels = parse_count(v); }},
      {"encoder_heads", [](RunConfig& c, const std::string& v) { c.encoder.heads = parse_count(v); }},
      {"mlp_ratio", [](RunConfig& c, const std::string& v) { c.encoder.mlp_ratio = parse_count(v); }},
      {"fdm_heads", [](RunConfig& c, const std::string& v) { c.fdm_heads = parse_count(v); }},
      {"k", [](RunConfig& c, const std::string& v) { c.k = parse_count(v); }},
      {"ids_per_batch", [](RunConfig& c, const std::string& v) { c.train.ids_per_batch = parse_count(v); }},
      {"samples_per_id", [](RunConfig& c, const std::string& v) { c.train.samples_per_id = parse_count(v); }},
      {"lr", [](RunConfig& c, const std::string& v) { c.train.lr = parse_double(v); }},
      {"momentum", [](RunConfig& c, const std::string& v) { c.train.momentum = parse_double(v); }},
      {"weight_decay", [](RunConfig& c, const std::string& v) { c.train.weight_decay = parse_double(v); }},
      {"epochs", [](RunConfig& c, const std::string& v) { c.train.epochs = parse_count(v); }},
      {"memory_momentum",
       [](RunConfig& c, const std::string& v) { c.train.memory_momentum = static_cast<float>(parse_double(v)); }},
      {"temperature",
       [](RunConfig& c, const std::string& v) { c.train.temperature = static_cast<float>(parse_double(v)); }},
      {"contrastive_similarity",
       [](RunConfig& c, const std::string& v) {
         if (v == "cosine") {
           c.train.similarity = Similarity::Cosine;
         } else if (v == "dot") {
           c.train.similarity = Similarity::Dot;
         } else {
           throw ConfigError("expected cosine or dot, got '" + v + "'");
         }
       }},
      {"grad_clip", [](RunConfig& c, const std::string& v) { c.train.grad_clip = parse_double(v); }},
      {"triplet_margin",
       [](RunConfig& c, const std::string& v) { c.train.triplet_margin = static_cast<float>(parse_double(v)); }},
      {"loss_norm",
       [](RunConfig& c, const std::string& v) {
         if (v == "sum") {
           c.train.loss_norm = LossNorm::Sum;
         } else if (v == "mean") {
           c.train.loss_norm = LossNorm::Mean;
         } else {
           throw ConfigError("loss_norm must be 'sum' or 'mean', got '" + v + "'");
         }
       }},
      {"mse", [](RunConfig& c, const std::string& v) { c.train.components.mse = parse_bool(v); }},
      {"npo", [](RunConfig& c, const std::string& v) { c.train.components.npo = parse_bool(v); }},
      {"oem", [](RunConfig& c, const std::string& v) { c.train.components.oem = parse_bool(v); }},
      {"fdm", [](RunConfig& c, const std::string& v) { c.train.components.fdm = parse_bool(v); }},
      {"contrastive", [](RunConfig& c, const std::string& v) { c.train.components.contrastive = parse_bool(v); }},
      {"random_erasing",
       [](RunConfig& c, const std::string& v) { c.train.components.random_erasing = parse_bool(v); }},
      {"triplet", [](RunConfig& c, const std::string& v) { c.train.components.triplet = parse_bool(v); }},
      {"cross_camera_only", [](RunConfig& c, const std::string& v) { c.cross_camera_only = parse_bool(v); }},
  };
  return table;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* fmt_bool(bool b) { return b ? "true" : "false"; }

}  // namespace

void RunConfig::validate() const {
  encoder.validate();
  if (data.ids < 2) throw ConfigError("ids must be at least 2");
  if (data.per_id < 2 || data.eval_per_id < 2) throw ConfigError("per_id and eval_per_id must be at least 2");
  if (data.patches == 0) throw ConfigError("patches must be at least 1");
  if (train.samples_per_id < 2) throw ConfigError("samples_per_id must be at least 2");
  if (train.ids_per_batch == 0 || train.ids_per_batch > data.ids) {
    throw ConfigError("ids_per_batch must lie in [1, ids]");
  }
  if (train.samples_per_id > data.per_id) throw ConfigError("samples_per_id exceeds per_id");
  if (k == 0 || k >= data.ids) {
    throw ConfigError("k=" + std::to_string(k) + " must lie in [1, ids=" + std::to_string(data.ids) + ")");
  }
  if (fdm_heads == 0 || (kParts * encoder.channels) % fdm_heads != 0) {
    throw ConfigError("fdm_heads must divide 4 * channels");
  }
  if (!(train.temperature > 0.0f)) throw ConfigError("temperature must be positive");
  if (train.memory_momentum < 0.0f || train.memory_momentum > 1.0f) {
    throw ConfigError("memory_momentum must lie in [0, 1]");
  }
  if (!(train.lr >= 0.0)) throw ConfigError("lr must be non-negative");
  if (!(train.grad_clip >= 0.0)) throw ConfigError("grad_clip must be non-negative");
  if (train.epochs == 0) throw ConfigError("epochs must be positive");
}

RunConfig parse_config(std::string_view text) {
  RunConfig config;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, end == std::string_view::npos ? text.size() - pos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto& table = setters();
    auto it = table.find(key);
    if (it == table.end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    try {
      it->second(config, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + key + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string format_config(const RunConfig& c) {
  std::ostringstream o;
  o << "seed = " << c.seed << "\n";
  o << "ids = " << c.data.ids << "\n";
  o << "eval_ids = " << c.data.eval_ids << "\n";
  o << "per_id = " << c.data.per_id << "\n";
  o << "eval_per_id = " << c.data.eval_per_id << "\n";
  o << "patches = " << c.data.patches << "\n";
  o << "height = " << c.encoder.height << "\n";
  o << "width = " << c.encoder.width << "\n";
  o << "patch = " << c.encoder.patch << "\n";
  o << "depth = " << c.encoder.depth << "\n";
  o << "channels = " << c.encoder.channels << "\n";
  o << "encoder_heads = " << c.encoder.heads << "\n";
  o << "mlp_ratio = " << c.encoder.mlp_ratio << "\n";
  o << "fdm_heads = " << c.fdm_heads << "\n";
  o << "k = " << c.k << "\n";
  o << "ids_per_batch = " << c.train.ids_per_batch << "\n";
  o << "samples_per_id = " << c.train.samples_per_id << "\n";
  o << "lr = " << fmt_double(c.train.lr) << "\n";
  o << "momentum = " << fmt_double(c.train.momentum) << "\n";
  o << "weight_decay = " << fmt_double(c.train.weight_decay) << "\n";
  o << "epochs = " << c.train.epochs << "\n";
  o << "memory_momentum = " << fmt_double(c.train.memory_momentum) << "\n";
  o << "temperature = " << fmt_double(c.train.temperature) << "\n";
  o << "contrastive_similarity = " << to_string(c.train.similarity) << "\n";
  o << "grad_clip = " << fmt_double(c.train.grad_clip) << "\n";
  o << "triplet_margin = " << fmt_double(c.train.triplet_margin) << "\n";
  o << "loss_norm = " << (c.train.loss_norm == LossNorm::Sum ? "sum" : "mean") << "\n";
  const Components& m = c.train.components;
  o << "mse = " << fmt_bool(m.mse) << "\n";
  o << "npo = " << fmt_bool(m.npo) << "\n";
  o << "oem = " << fmt_bool(m.oem) << "\n";
  o << "fdm = " << fmt_bool(m.fdm) << "\n";
  o << "contrastive = " << fmt_bool(m.contrastive) << "\n";
  o << "random_erasing = " << fmt_bool(m.random_erasing) << "\n";
  o << "triplet = " << fmt_bool(m.triplet) << "\n";
  o << "cross_camera_only = " << fmt_bool(c.cross_camera_only) << "\n";
  return o.str();
}

}  // namespace fed
