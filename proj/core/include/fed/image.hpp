// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <vector>

namespace fed {

/// 3-channel planar (CHW) raster with values in [0, 1].
class Image {
 public:
  static constexpr std::size_t kChannels = 3;

  Image() = default;
  Image(std::size_t height, std::size_t width, float fill = 0.0f);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  float& at(std::size_t c, std::size_t y, std::size_t x) {
    return pixels_[(c * height_ + y) * width_ + x];
  }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return pixels_[(c * height_ + y) * width_ + x];
  }
  void set_rgb(std::size_t y, std::size_t x, const std::array<float, 3>& rgb) {
    for (std::size_t c = 0; c < kChannels; ++c) at(c, y, x) = rgb[c];
  }

  const std::vector<float>& pixels() const { return pixels_; }
  std::vector<float>& pixels() { return pixels_; }

  void clamp();
  bool operator==(const Image& other) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<float> pixels_;
};

/// Bilinear resample to the requested extents.
Image resize_bilinear(const Image& src, std::size_t height, std::size_t width);

/// Binary PPM (P6), 8 bits per channel.
void write_ppm(const std::filesystem::path& path, const Image& image);

}  // namespace fed
