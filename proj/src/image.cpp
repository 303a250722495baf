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

#include "detbench/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>

#include "detbench/error.hpp"

namespace detbench {

Image::Image(int width, int height, std::uint8_t fill)
    : width_(width), height_(height),
      data_(static_cast<std::size_t>(width) * height * kChannels, fill) {}

Image::Image(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), data_(std::move(pixels)) {
  if (data_.size() != static_cast<std::size_t>(width) * height * kChannels) {
    throw ParameterError("pixel buffer does not match image size");
  }
}

namespace {

struct PngReader {
  png_image image{};
  PngReader() {
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngReader() { png_image_free(&image); }
};

std::vector<std::uint8_t> read_png_pixels(const std::string& path, png_uint_32 format,
                                          int& width, int& height) {
  PngReader reader;
  if (!png_image_begin_read_from_file(&reader.image, path.c_str())) {
    throw IoError("cannot read PNG " + path + ": " + reader.image.message);
  }
  reader.image.format = format;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(reader.image));
  if (!png_image_finish_read(&reader.image, nullptr, buf.data(), 0, nullptr)) {
    throw IoError("cannot decode PNG " + path + ": " + reader.image.message);
  }
  width = static_cast<int>(reader.image.width);
  height = static_cast<int>(reader.image.height);
  return buf;
}

}  // namespace

LoadedPng load_png(const std::string& path) {
  bool has_alpha = false;
  {
    PngReader probe;
    if (!png_image_begin_read_from_file(&probe.image, path.c_str())) {
      throw IoError("cannot read PNG " + path + ": " + probe.image.message);
    }
    has_alpha = (probe.image.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  }
  int w = 0;
  int h = 0;
  LoadedPng out;
  if (!has_alpha) {
    auto px = read_png_pixels(path, PNG_FORMAT_RGB, w, h);
    out.rgb = Image(w, h, std::move(px));
    return out;
  }
  auto rgba = read_png_pixels(path, PNG_FORMAT_RGBA, w, h);
  Image rgb(w, h);
  Mask alpha(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = (static_cast<std::size_t>(y) * w + x) * 4;
      for (int c = 0; c < 3; ++c) rgb.at(x, y, c) = rgba[i + c];
      alpha.at(x, y) = static_cast<float>(rgba[i + 3]) / 255.0f;
    }
  }
  out.rgb = std::move(rgb);
  out.alpha = std::move(alpha);
  return out;
}

Mask load_mask_png(const std::string& path) {
  int w = 0;
  int h = 0;
  auto gray = read_png_pixels(path, PNG_FORMAT_GRAY, w, h);
  Mask m(w, h);
  for (std::size_t i = 0; i < gray.size(); ++i) m.data()[i] = static_cast<float>(gray[i]) / 255.0f;
  return m;
}

void save_png(const std::string& path, const Image& image) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  png_image out{};
  out.version = PNG_IMAGE_VERSION;
  out.width = static_cast<png_uint_32>(image.width());
  out.height = static_cast<png_uint_32>(image.height());
  out.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&out, path.c_str(), 0, image.data().data(), 0, nullptr)) {
    const std::string msg = out.message;
    png_image_free(&out);
    throw IoError("cannot write PNG " + path + ": " + msg);
  }
  png_image_free(&out);
}

namespace {

// Source coordinate for destination index i under pixel-center alignment.
inline double source_coord(int i, int src_len, int dst_len) {
  return (i + 0.5) * static_cast<double>(src_len) / dst_len - 0.5;
}

template <typename Fetch>
double bilinear(double x, double y, int w, int h, Fetch&& fetch) {
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = fetch(x0, y0) * (1.0 - fx) + fetch(x1, y0) * fx;
  const double bottom = fetch(x0, y1) * (1.0 - fx) + fetch(x1, y1) * fx;
  return top * (1.0 - fy) + bottom * fy;
}

inline std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

double sample_bilinear(const Image& src, double x, double y, int channel) {
  return bilinear(x, y, src.width(), src.height(),
                  [&](int xi, int yi) { return static_cast<double>(src.at(xi, yi, channel)); });
}

Image resize_bilinear(const Image& src, int width, int height) {
  if (width < 1 || height < 1 || src.empty()) throw ParameterError("resize to empty image");
  Image out(width, height);
  for (int y = 0; y < height; ++y) {
    const double sy = source_coord(y, src.height(), height);
    for (int x = 0; x < width; ++x) {
      const double sx = source_coord(x, src.width(), width);
      for (int c = 0; c < Image::kChannels; ++c) {
        out.at(x, y, c) = to_u8(sample_bilinear(src, sx, sy, c));
      }
    }
  }
  return out;
}

Mask resize_bilinear(const Mask& src, int width, int height) {
  if (width < 1 || height < 1 || src.width() < 1 || src.height() < 1) {
    throw ParameterError("resize to empty mask");
  }
  Mask out(width, height);
  for (int y = 0; y < height; ++y) {
    const double sy = source_coord(y, src.height(), height);
    for (int x = 0; x < width; ++x) {
      const double sx = source_coord(x, src.width(), width);
      out.at(x, y) = static_cast<float>(bilinear(sx, sy, src.width(), src.height(),
                                                 [&](int xi, int yi) { return src.at(xi, yi); }));
    }
  }
  return out;
}

std::vector<double> gaussian_kernel(double sigma, int radius) {
  if (radius < 0) throw ParameterError("negative kernel radius");
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1), 0.0);
  if (sigma <= 0.0) {
    k[radius] = 1.0;
    return k;
  }
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

Mask gaussian_blur(const Mask& src, double sigma, int radius) {
  if (sigma <= 0.0 || radius <= 0) return src;
  const auto k = gaussian_kernel(sigma, radius);
  const int w = src.width();
  const int h = src.height();
  Mask tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int xi = x + i;
        if (xi >= 0 && xi < w) acc += k[i + radius] * src.at(xi, y);
      }
      tmp.at(x, y) = static_cast<float>(acc);
    }
  }
  Mask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int yi = y + i;
        if (yi >= 0 && yi < h) acc += k[i + radius] * tmp.at(x, yi);
      }
      out.at(x, y) = static_cast<float>(acc);
    }
  }
  return out;
}

}  // namespace detbench
