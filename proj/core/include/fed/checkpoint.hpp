// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fed/tensor.hpp"

namespace fed {

/// Ordered list of named tensors; order is preserved through serialization.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

inline constexpr char kCheckpointMagic[4] = {'F', 'E', 'D', 'C'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

/// Binary layout (all integers little-endian):
///   "FEDC" | u8 version | u32 count |
///   count x ( u32 name_len | name bytes | u8 rank | rank x u32 extent | f32 payload )
std::string encode_checkpoint(const NamedTensors& tensors);
/// Throws LoadError on any malformed or truncated input.
NamedTensors decode_checkpoint(std::string_view bytes);

/// Writes to a sibling temp file and renames it into place.
void write_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors read_checkpoint(const std::filesystem::path& path);

const Tensor* find_tensor(const NamedTensors& tensors, std::string_view name);

}  // namespace fed
