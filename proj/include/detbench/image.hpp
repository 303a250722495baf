// Copyright 2026 The detbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Minimal raster types: interleaved 8-bit RGB images and float masks.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace detbench {

class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  Image(int width, int height, std::uint8_t fill = 0);
  Image(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  std::uint8_t& at(int x, int y, int c) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }

  std::span<std::uint8_t> data() { return data_; }
  std::span<const std::uint8_t> data() const { return data_; }

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Single-channel float plane, used for alpha masks in [0, 1].
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height, float fill = 0.0f)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }

  float& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  float at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

/// Rec.601 luma.
inline double luminance(double r, double g, double b) {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

struct LoadedPng {
  Image rgb;
  std::optional<Mask> alpha;  // present when the file carries an alpha channel
};

/// PNG codec backed by libpng. Throws IoError.
LoadedPng load_png(const std::string& path);
void save_png(const std::string& path, const Image& image);
/// Reads a grayscale (or any) PNG as a mask in [0, 1].
Mask load_mask_png(const std::string& path);

/// Bilinear resampling with pixel-center alignment.
Image resize_bilinear(const Image& src, int width, int height);
Mask resize_bilinear(const Mask& src, int width, int height);

/// Bilinear sample at a continuous pixel-center coordinate, clamped to the
/// image border.
double sample_bilinear(const Image& src, double x, double y, int channel);

/// Separable Gaussian blur with a kernel truncated at `radius` pixels; pixels
/// outside the plane are treated as zero. sigma <= 0 returns a copy.
Mask gaussian_blur(const Mask& src, double sigma, int radius);

/// 1-D Gaussian taps of length 2 * radius + 1, normalized to sum 1.
std::vector<double> gaussian_kernel(double sigma, int radius);

}  // namespace detbench
