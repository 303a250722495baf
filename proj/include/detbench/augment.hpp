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

// Flight-style distortion kernels and a seeded, probabilistic application
// spec. None of the kernels moves image content globally, so annotations pass
// through augmentation unchanged.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "detbench/image.hpp"

namespace detbench {

/// Square convolution kernel, row-major, odd side length.
struct Kernel2D {
  int size = 1;
  std::vector<double> weights;

  double at(int dx, int dy) const {
    const int r = size / 2;
    return weights[static_cast<std::size_t>(dy + r) * size + (dx + r)];
  }
  double sum() const;
};

/// Convolution with reflect-101 borders (edge pixel not repeated).
Image convolve(const Image& image, const Kernel2D& kernel);

/// Per-channel histogram stretch. Throws ParameterError for cutoff outside [0, 0.5).
Image autocontrast(const Image& image, double cutoff_fraction);

/// Multiplies all channels by a linear ramp from 1 - strength to
/// 1 + strength along `angle_deg` (0 = left to right).
Image illumination(const Image& image, double angle_deg, double strength);

/// Line kernel of `length` taps rasterized at `angle_deg`; length must be odd and >= 3.
Kernel2D motion_blur_kernel(int length, double angle_deg);
Image motion_blur(const Image& image, int length, double angle_deg);

/// Disk kernel: offsets whose center lies within `radius`; radius >= 1.
Kernel2D defocus_kernel(double radius);
Image defocus(const Image& image, double radius);

/// Scales red by 1 + shift / max(w, h) and blue by 1 - shift / max(w, h)
/// about the image center.
Image chromatic_aberration(const Image& image, double shift);

/// Gaussian sensor noise: a luminance component of std intensity * 255 shared
/// by all channels plus per-channel color noise of std color_shift * 255.
Image iso_noise(const Image& image, double color_shift, double intensity, std::uint64_t seed);

enum class KernelId {
  kAutocontrast,
  kIllumination,
  kMotionBlur,
  kDefocus,
  kChromaticAberration,
  kIsoNoise,
};

std::string_view kernel_name(KernelId id);
std::optional<KernelId> parse_kernel_id(std::string_view name);

struct Range {
  double min = 0.0;
  double max = 0.0;
};

struct AutocontrastParams {
  Range cutoff{0.0, 0.02};
};
struct IlluminationParams {
  Range strength{0.1, 0.3};
  Range angle_deg{0.0, 360.0};
};
struct MotionBlurParams {
  std::vector<int> lengths{5, 7, 9};
  Range angle_deg{0.0, 180.0};
};
struct DefocusParams {
  std::vector<int> radii{2, 3};
};
struct ChromaticAberrationParams {
  Range shift{1.0, 3.0};
};
struct IsoNoiseParams {
  Range color_shift{0.01, 0.05};
  Range intensity{0.01, 0.05};
};

using KernelParams = std::variant<AutocontrastParams, IlluminationParams, MotionBlurParams,
                                  DefocusParams, ChromaticAberrationParams, IsoNoiseParams>;

struct KernelConfig {
  KernelParams params;
  double probability = 0.2;
  bool enabled = true;

  KernelId id() const { return static_cast<KernelId>(params.index()); }
};

struct AugmentationSpec {
  std::vector<KernelConfig> kernels;

  /// Throws ParameterError on duplicate ids, bad probabilities or bad ranges.
  void validate() const;
};

/// All six kernels in canonical order, p = 0.2, default ranges.
AugmentationSpec default_augmentation_spec();

/// JSON config: {"kernels": [{"kernel": "motion-blur", "enabled": true,
/// "probability": 0.2, "lengths": [5, 7, 9], "angle_deg": [0, 180]}, ...]}.
/// Omitted fields take their defaults. Throws ParseError.
AugmentationSpec parse_augmentation_spec(std::string_view json_text);
std::string write_augmentation_spec(const AugmentationSpec& spec);

struct AppliedKernel {
  KernelId id;
  std::map<std::string, double> params;
};

struct AugmentResult {
  Image image;
  std::vector<AppliedKernel> applied;
};

/// Considers kernels in spec order; kernel i draws its coin flip and
/// parameters from a stream derived from (seed, i).
AugmentResult apply_spec(const Image& image, const AugmentationSpec& spec, std::uint64_t seed);

}  // namespace detbench
