// SPDX-License-Identifier: Apache-2.0
#include "fed/model.hpp"

#include <map>
#include <string>

#include "fed/errors.hpp"
#include "fed/rng.hpp"

namespace fed {

namespace {

Rng module_rng(std::uint64_t seed, const char* name) { return Rng(derive_seed(seed, name)); }

FdmConfig fdm_config(const RunConfig& c) {
  FdmConfig f;
  f.dim = kParts * c.encoder.channels;
  f.heads = c.fdm_heads;
  f.k = c.k;
  return f;
}

template <typename T>
T build(std::uint64_t seed, const char* name, auto&&... args) {
  Rng rng = module_rng(seed, name);
  return T(std::forward<decltype(args)>(args)..., rng);
}

Linear head(std::uint64_t seed, const char* name, std::size_t in, std::size_t out) {
  Rng rng = module_rng(seed, name);
  return Linear(name, in, out, false, rng);
}

}  // namespace

FedModel::FedModel(const RunConfig& config, std::uint64_t seed)
    : encoder(build<Encoder>(seed, "encoder", config.encoder)),
      oem(build<OcclusionErasing>(seed, "oem", config.encoder.channels)),
      fdm(build<FeatureDiffusion>(seed, "fdm", fdm_config(config))),
      cls_head(head(seed, "head.cls", config.encoder.channels, config.data.ids)),
      oem_head(head(seed, "head.oem", kParts * config.encoder.channels, config.data.ids)),
      fdm_head(head(seed, "head.fdm", kParts * config.encoder.channels, config.data.ids)),
      num_ids_(config.data.ids) {}

std::vector<Parameter*> FedModel::inference_parameters() {
  std::vector<Parameter*> out;
  encoder.collect(out);
  oem.collect(out);
  return out;
}

std::vector<Parameter*> FedModel::parameters() {
  std::vector<Parameter*> out = inference_parameters();
  fdm.collect(out);
  cls_head.collect(out);
  oem_head.collect(out);
  fdm_head.collect(out);
  return out;
}

NamedTensors FedModel::state() {
  NamedTensors out;
  for (Parameter* p : parameters()) out.emplace_back(p->name, p->value);
  return out;
}

void FedModel::load_state(const NamedTensors& tensors) {
  std::map<std::string, Parameter*> by_name;
  for (Parameter* p : parameters()) by_name[p->name] = p;
  std::map<std::string, bool> required;
  for (Parameter* p : inference_parameters()) required[p->name] = false;

  for (const auto& [name, t] : tensors) {
    if (name.rfind("memory.", 0) == 0) continue;
    auto it = by_name.find(name);
    if (it == by_name.end()) throw LoadError("checkpoint tensor '" + name + "' does not belong to this architecture");
    if (it->second->value.shape() != t.shape()) {
      throw LoadError("checkpoint tensor '" + name + "' has shape " + shape_string(t.shape()) +
                      ", model expects " + shape_string(it->second->value.shape()));
    }
    it->second->value = t;
    if (auto r = required.find(name); r != required.end()) r->second = true;
  }
  for (const auto& [name, seen] : required) {
    if (!seen) throw LoadError("checkpoint is missing tensor '" + name + "'");
  }
}

Tensor FedModel::embed(std::span<const Image* const> images, bool oem_enabled) {
  Graph g(false);
  Var tokens = encoder.encode(g, images);
  Var parts = encoder.part_pool(g, tokens, images.size());
  auto out = oem.forward(g, parts, images.size(), oem_enabled);
  return g.value(out.weighted);
}

Tensor FedModel::occlusion_scores(std::span<const Image* const> images) {
  Graph g(false);
  Var tokens = encoder.encode(g, images);
  Var parts = encoder.part_pool(g, tokens, images.size());
  return g.value(oem.forward(g, parts, images.size()).scores);
}

}  // namespace fed
