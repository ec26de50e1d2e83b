// SPDX-License-Identifier: Apache-2.0
#include "fed/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "fed/errors.hpp"

namespace fed {

Image::Image(std::size_t height, std::size_t width, float fill)
    : height_(height), width_(width), pixels_(kChannels * height * width, fill) {}

void Image::clamp() {
  for (float& v : pixels_) v = std::clamp(v, 0.0f, 1.0f);
}

Image resize_bilinear(const Image& src, std::size_t height, std::size_t width) {
  if (src.empty() || height == 0 || width == 0) {
    throw DimensionError("resize_bilinear: empty source or target");
  }
  Image out(height, width);
  const double sy = static_cast<double>(src.height()) / static_cast<double>(height);
  const double sx = static_cast<double>(src.width()) / static_cast<double>(width);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height() - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, src.height() - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width() - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, src.width() - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        const double top = src.at(c, y0, x0) * (1 - wx) + src.at(c, y0, x1) * wx;
        const double bot = src.at(c, y1, x0) * (1 - wx) + src.at(c, y1, x1) * wx;
        out.at(c, y, x) = static_cast<float>(top * (1 - wy) + bot * wy);
      }
    }
  }
  return out;
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << "P6\n" << image.width() << " " << image.height() << "\n255\n";
  for (std::size_t y = 0; y < image.height(); ++y) {
    for (std::size_t x = 0; x < image.width(); ++x) {
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
        f.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f))));
      }
    }
  }
  if (!f) throw IoError("write failed for " + path.string());
}

}  // namespace fed
