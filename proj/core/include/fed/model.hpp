// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fed/checkpoint.hpp"
#include "fed/config.hpp"
#include "fed/encoder.hpp"
#include "fed/fdm.hpp"
#include "fed/layers.hpp"
#include "fed/oem.hpp"

namespace fed {

/// Encoder, OEM, FDM and the three identity classifiers. Both training
/// branches run through this one parameter set.
class FedModel {
 public:
  FedModel(const RunConfig& config, std::uint64_t seed);

  Encoder encoder;
  OcclusionErasing oem;
  FeatureDiffusion fdm;
  Linear cls_head;  // c -> IDs
  Linear oem_head;  // 4c -> IDs
  Linear fdm_head;  // 4c -> IDs

  std::size_t num_ids() const { return num_ids_; }
  std::size_t feature_dim() const { return kParts * encoder.config().channels; }

  std::vector<Parameter*> parameters();
  /// Parameters used at inference (encoder and OEM).
  std::vector<Parameter*> inference_parameters();

  NamedTensors state();
  /// Copies matching tensors into the model. Every inference parameter must
  /// be present with its exact shape; training-only parameters (FDM, heads)
  /// are loaded when present. Unknown names or shape mismatches raise
  /// LoadError naming the tensor. Names under "memory." are skipped.
  void load_state(const NamedTensors& tensors);

  /// Inference embedding: flattened post-OEM part features [B x 4c]. FDM and
  /// the classifier heads are not touched.
  Tensor embed(std::span<const Image* const> images, bool oem_enabled);
  /// OEM stripe scores [B x 4], top to bottom.
  Tensor occlusion_scores(std::span<const Image* const> images);

 private:
  std::size_t num_ids_;
};

}  // namespace fed
