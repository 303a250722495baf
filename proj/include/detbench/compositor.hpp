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

// Semi-synthetic image generation: paste sensor foregrounds into the top band
// of real backgrounds with brightness adaptation and a feathered alpha edge,
// and emit the pasted rectangles as ground truth.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "detbench/annotation.hpp"
#include "detbench/image.hpp"

namespace detbench {

enum class AssetKind { kRealCutout, kRender };

struct ForegroundAsset {
  std::string id;
  AssetKind kind = AssetKind::kRealCutout;
  Image image;
  Mask mask;

  /// Throws ParameterError unless the mask matches the image and contains at
  /// least one pixel above 0.5.
  void validate() const;
};

struct Background {
  std::string id;
  Image image;
};

struct CompositeParams {
  double top_band_fraction = 0.4;
  double dual_insert_prob = 0.02;
  std::pair<double, double> scale_range{0.03, 0.12};  // of background width
  std::pair<double, double> blur_sigma_range{0.5, 1.5};  // px
  double brightness_blend = 1.0;
  std::pair<double, double> gain_clamp{0.4, 2.5};

  void validate() const;
};

struct Placement {
  std::string asset_id;
  PixelBox rect;  // integral coordinates
  double blur_sigma = 0.0;
  double gain = 1.0;  // effective gain, after clamping and blending
};

struct CompositeRecipe {
  std::uint64_t seed = 0;
  std::string background_id;
  std::vector<Placement> placements;
};

struct CompositeResult {
  Image image;
  std::vector<GroundTruth> objects;
  CompositeRecipe recipe;
};

/// Height in pixels of the band that placements must stay inside.
int top_band_pixels(int background_height, double top_band_fraction);

/// Pixels beyond this Chebyshev distance from a placement rect are untouched.
int feather_radius(double sigma);

/// Mean Rec.601 luminance of asset pixels whose mask exceeds 0.5.
double masked_mean_luminance(const Image& image, const Mask& mask);
/// Mean Rec.601 luminance over a pixel rectangle.
double region_mean_luminance(const Image& image, const PixelBox& rect);

/// Brightness gain that matches the asset's masked luminance to the background
/// region: ratio clamped to `gain_clamp`, then blended toward 1 by
/// `brightness_blend`. A black asset yields 1.0 with a warning.
double adapt_brightness(const Image& asset, const Mask& mask, const Image& background,
                        const PixelBox& region, const CompositeParams& params);

/// Draws one or two placements. Deterministic in `seed`.
/// Throws UnplaceableError if the drawn asset cannot fit at minimum scale.
CompositeRecipe sample_recipe(std::uint64_t seed, const Background& background,
                              std::span<const ForegroundAsset> assets,
                              const CompositeParams& params);

/// Renders a recipe. Throws Error if a placement rect lies outside the image
/// or references an unknown asset.
CompositeResult blend(const Background& background, const CompositeRecipe& recipe,
                      std::span<const ForegroundAsset> assets);

struct PlannedImage {
  std::size_t index = 0;
  std::size_t background_index = 0;
  CompositeRecipe recipe;
  Origin origin = Origin::kGenReal;
};

/// Draws recipes for n images. Image i draws from a seed derived from
/// (master_seed, i); unplaceable draws are retried with a fresh derived seed,
/// up to 10 * n attempts in total.
std::vector<PlannedImage> plan_dataset(std::span<const Background> backgrounds,
                                       std::span<const ForegroundAsset> assets,
                                       std::size_t n_images, const CompositeParams& params,
                                       std::uint64_t master_seed);

using CompositeSink =
    std::function<void(const PlannedImage&, CompositeResult&&, const ImageEntry&)>;

/// Plans and renders a dataset, handing results to `sink` in index order.
/// Rendering uses up to `jobs` threads; output does not depend on `jobs`.
void generate_dataset(std::span<const Background> backgrounds,
                      std::span<const ForegroundAsset> assets, std::size_t n_images,
                      const CompositeParams& params, std::uint64_t master_seed,
                      const CompositeSink& sink, int jobs = 1);

struct GeneratedDataset {
  std::vector<CompositeResult> images;
  std::vector<ImageEntry> manifest;
};

GeneratedDataset generate_dataset(std::span<const Background> backgrounds,
                                  std::span<const ForegroundAsset> assets,
                                  std::size_t n_images, const CompositeParams& params,
                                  std::uint64_t master_seed, int jobs = 1);

/// Relative image path used for generated image i.
std::string generated_image_name(std::size_t index);

/// Loads every *.png in `dir` (sorted) as a background.
std::vector<Background> load_backgrounds(const std::string& dir);

/// Loads assets from `dir/real-cutout/*.png` and `dir/render/*.png`. The alpha
/// comes from the PNG alpha channel or from a sibling `<name>.mask.png`.
std::vector<ForegroundAsset> load_assets(const std::string& dir);

}  // namespace detbench
