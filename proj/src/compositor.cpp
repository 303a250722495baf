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

#include "detbench/compositor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <optional>
#include <thread>

#include "detbench/error.hpp"
#include "detbench/logging.hpp"
#include "detbench/rng.hpp"

namespace detbench {
namespace fs = std::filesystem;

void ForegroundAsset::validate() const {
  if (image.empty()) throw ParameterError("asset " + id + " has an empty image");
  if (mask.width() != image.width() || mask.height() != image.height()) {
    throw ParameterError("asset " + id + ": mask size differs from image size");
  }
  const auto d = mask.data();
  if (std::none_of(d.begin(), d.end(), [](float v) { return v > 0.5f; })) {
    throw ParameterError("asset " + id + ": mask has no pixel above 0.5");
  }
}

void CompositeParams::validate() const {
  auto ordered = [](const std::pair<double, double>& r) { return r.first <= r.second; };
  if (!(top_band_fraction > 0.0 && top_band_fraction <= 1.0)) {
    throw ParameterError("top_band_fraction must be in (0, 1]");
  }
  if (!(dual_insert_prob >= 0.0 && dual_insert_prob <= 1.0)) {
    throw ParameterError("dual_insert_prob must be in [0, 1]");
  }
  if (!(brightness_blend >= 0.0 && brightness_blend <= 1.0)) {
    throw ParameterError("brightness_blend must be in [0, 1]");
  }
  if (!ordered(scale_range) || !(scale_range.first > 0.0) || scale_range.second > 1.0) {
    throw ParameterError("scale_range must satisfy 0 < min <= max <= 1");
  }
  if (!ordered(blur_sigma_range) || blur_sigma_range.first < 0.0) {
    throw ParameterError("blur_sigma_range must satisfy 0 <= min <= max");
  }
  if (!ordered(gain_clamp) || !(gain_clamp.first > 0.0)) {
    throw ParameterError("gain_clamp must satisfy 0 < min <= max");
  }
}

int top_band_pixels(int background_height, double top_band_fraction) {
  return static_cast<int>(std::floor(top_band_fraction * background_height + 1e-9));
}

int feather_radius(double sigma) {
  return sigma > 0.0 ? static_cast<int>(std::floor(4.0 * sigma)) : 0;
}

double masked_mean_luminance(const Image& image, const Mask& mask) {
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (mask.at(x, y) > 0.5f) {
        sum += luminance(image.at(x, y, 0), image.at(x, y, 1), image.at(x, y, 2));
        ++n;
      }
    }
  }
  if (n == 0) throw ParameterError("empty asset mask");
  return sum / static_cast<double>(n);
}

double region_mean_luminance(const Image& image, const PixelBox& rect) {
  const int x0 = std::max(0, static_cast<int>(rect.x0));
  const int y0 = std::max(0, static_cast<int>(rect.y0));
  const int x1 = std::min(image.width(), static_cast<int>(rect.x1));
  const int y1 = std::min(image.height(), static_cast<int>(rect.y1));
  if (x1 <= x0 || y1 <= y0) throw ParameterError("empty background region");
  double sum = 0.0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      sum += luminance(image.at(x, y, 0), image.at(x, y, 1), image.at(x, y, 2));
    }
  }
  return sum / (static_cast<double>(x1 - x0) * (y1 - y0));
}

double adapt_brightness(const Image& asset, const Mask& mask, const Image& background,
                        const PixelBox& region, const CompositeParams& params) {
  const double fg = masked_mean_luminance(asset, mask);
  const double bg = region_mean_luminance(background, region);
  if (fg <= 0.0) {
    log_warning("asset has zero mean luminance; brightness left unchanged");
    return 1.0;
  }
  const double gain = std::clamp(bg / fg, params.gain_clamp.first, params.gain_clamp.second);
  return 1.0 + params.brightness_blend * (gain - 1.0);
}

namespace {

struct Size {
  int w;
  int h;
};

Size scaled_size(double scale, int bg_w, double aspect) {
  const int w = std::max(1, static_cast<int>(std::lround(scale * bg_w)));
  const int h = std::max(1, static_cast<int>(std::lround(w * aspect)));
  return {w, h};
}

Placement draw_placement(Rng& rng, const Background& bg, std::span<const ForegroundAsset> assets,
                         const CompositeParams& params) {
  const auto& asset =
      assets[static_cast<std::size_t>(rng.uniform_int(0, std::ssize(assets) - 1))];
  const int bw = bg.image.width();
  const int bh = bg.image.height();
  const int band = top_band_pixels(bh, params.top_band_fraction);
  const double aspect = static_cast<double>(asset.image.height()) / asset.image.width();

  const double s_min = params.scale_range.first;
  const Size smallest = scaled_size(s_min, bw, aspect);
  if (smallest.w > bw || smallest.h > band) {
    throw UnplaceableError("asset " + asset.id + " cannot fit in the top band of background " +
                           bg.id + " at minimum scale");
  }
  // Largest scale whose height still fits the band.
  const double s_fit = std::min(1.0, band / (bw * aspect));
  const double s_hi = std::max(s_min, std::min(params.scale_range.second, s_fit));
  Size size = scaled_size(rng.uniform(s_min, s_hi), bw, aspect);
  size.w = std::min(size.w, bw);
  size.h = std::min(size.h, band);

  const auto x0 = rng.uniform_int(0, bw - size.w);
  const auto y0 = rng.uniform_int(0, band - size.h);
  Placement p;
  p.asset_id = asset.id;
  p.rect = PixelBox{static_cast<double>(x0), static_cast<double>(y0),
                    static_cast<double>(x0 + size.w), static_cast<double>(y0 + size.h)};
  p.blur_sigma = rng.uniform(params.blur_sigma_range.first, params.blur_sigma_range.second);
  p.gain = adapt_brightness(asset.image, asset.mask, bg.image, p.rect, params);
  return p;
}

const ForegroundAsset* find_asset(std::span<const ForegroundAsset> assets, const std::string& id) {
  for (const auto& a : assets) {
    if (a.id == id) return &a;
  }
  return nullptr;
}

constexpr int kOverlapAttempts = 100;

}  // namespace

CompositeRecipe sample_recipe(std::uint64_t seed, const Background& background,
                              std::span<const ForegroundAsset> assets,
                              const CompositeParams& params) {
  if (assets.empty()) throw ParameterError("no foreground assets");
  if (background.image.empty()) throw ParameterError("background " + background.id + " is empty");
  Rng rng(seed);
  CompositeRecipe recipe;
  recipe.seed = seed;
  recipe.background_id = background.id;
  const bool dual = rng.bernoulli(params.dual_insert_prob);
  recipe.placements.push_back(draw_placement(rng, background, assets, params));
  if (dual) {
    for (int attempt = 0; attempt < kOverlapAttempts; ++attempt) {
      try {
        Placement second = draw_placement(rng, background, assets, params);
        if (iou(second.rect, recipe.placements.front().rect) == 0.0) {
          recipe.placements.push_back(std::move(second));
          break;
        }
      } catch (const UnplaceableError&) {
        // A second asset that cannot fit counts as a failed attempt.
      }
    }
  }
  return recipe;
}

CompositeResult blend(const Background& background, const CompositeRecipe& recipe,
                      std::span<const ForegroundAsset> assets) {
  const Image& bg = background.image;
  CompositeResult result;
  result.image = bg;
  result.recipe = recipe;
  Image& out = result.image;
  for (const Placement& p : recipe.placements) {
    const ForegroundAsset* asset = find_asset(assets, p.asset_id);
    if (asset == nullptr) throw Error("recipe references unknown asset " + p.asset_id);
    if (!p.rect.valid_in(bg.width(), bg.height())) {
      throw Error("recipe invariant violated: placement rect outside background " +
                  background.id);
    }
    const int x0 = static_cast<int>(p.rect.x0);
    const int y0 = static_cast<int>(p.rect.y0);
    const int tw = static_cast<int>(p.rect.width());
    const int th = static_cast<int>(p.rect.height());

    Image fg = resize_bilinear(asset->image, tw, th);
    if (p.gain != 1.0) {
      for (auto& v : fg.data()) {
        v = static_cast<std::uint8_t>(std::min(255L, std::lround(v * p.gain)));
      }
    }
    const int r = feather_radius(p.blur_sigma);
    Mask canvas(tw + 2 * r, th + 2 * r, 0.0f);
    {
      const Mask m = resize_bilinear(asset->mask, tw, th);
      for (int y = 0; y < th; ++y) {
        for (int x = 0; x < tw; ++x) canvas.at(x + r, y + r) = m.at(x, y);
      }
    }
    const Mask feathered = gaussian_blur(canvas, p.blur_sigma, r);

    for (int cy = 0; cy < feathered.height(); ++cy) {
      const int iy = y0 - r + cy;
      if (iy < 0 || iy >= out.height()) continue;
      const int fy = std::clamp(cy - r, 0, th - 1);
      for (int cx = 0; cx < feathered.width(); ++cx) {
        const int ix = x0 - r + cx;
        if (ix < 0 || ix >= out.width()) continue;
        const double a = std::clamp(static_cast<double>(feathered.at(cx, cy)), 0.0, 1.0);
        if (a <= 0.0) continue;
        const int fx = std::clamp(cx - r, 0, tw - 1);
        for (int c = 0; c < Image::kChannels; ++c) {
          const double v = a * fg.at(fx, fy, c) + (1.0 - a) * out.at(ix, iy, c);
          out.at(ix, iy, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
      }
    }
    result.objects.push_back(GroundTruth{0, from_pixel(p.rect, bg.width(), bg.height())});
  }
  return result;
}

std::vector<PlannedImage> plan_dataset(std::span<const Background> backgrounds,
                                       std::span<const ForegroundAsset> assets,
                                       std::size_t n_images, const CompositeParams& params,
                                       std::uint64_t master_seed) {
  if (n_images == 0) throw ParameterError("n_images must be >= 1");
  if (backgrounds.empty()) throw ParameterError("no backgrounds");
  if (assets.empty()) throw ParameterError("no foreground assets");
  params.validate();
  for (const auto& a : assets) a.validate();

  const std::size_t budget = 10 * n_images;
  std::size_t attempts = 0;
  std::vector<PlannedImage> plan;
  plan.reserve(n_images);
  for (std::size_t i = 0; i < n_images; ++i) {
    const std::uint64_t image_seed = derive_seed(master_seed, i);
    for (std::uint64_t attempt = 0;; ++attempt) {
      if (++attempts > budget) {
        throw UnplaceableError("gave up after " + std::to_string(budget) +
                               " placement attempts; assets do not fit the backgrounds");
      }
      const std::uint64_t seed = attempt == 0 ? image_seed : derive_seed(image_seed, attempt);
      Rng pick(derive_seed(seed, 0));
      const auto bg_index =
          static_cast<std::size_t>(pick.uniform_int(0, std::ssize(backgrounds) - 1));
      try {
        PlannedImage item;
        item.index = i;
        item.background_index = bg_index;
        item.recipe = sample_recipe(seed, backgrounds[bg_index], assets, params);
        const bool any_real = std::any_of(
            item.recipe.placements.begin(), item.recipe.placements.end(), [&](const Placement& p) {
              return find_asset(assets, p.asset_id)->kind == AssetKind::kRealCutout;
            });
        item.origin = any_real ? Origin::kGenReal : Origin::kGenRender;
        plan.push_back(std::move(item));
        break;
      } catch (const UnplaceableError& e) {
        log_warning(std::string(e.what()) + "; resampling image " + std::to_string(i));
      }
    }
  }
  return plan;
}

std::string generated_image_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "gen_%06zu.png", index);
  return buf;
}

void generate_dataset(std::span<const Background> backgrounds,
                      std::span<const ForegroundAsset> assets, std::size_t n_images,
                      const CompositeParams& params, std::uint64_t master_seed,
                      const CompositeSink& sink, int jobs) {
  const auto plan = plan_dataset(backgrounds, assets, n_images, params, master_seed);
  const std::size_t workers = static_cast<std::size_t>(std::max(1, jobs));
  const std::size_t batch = workers * 8;
  for (std::size_t start = 0; start < plan.size(); start += batch) {
    const std::size_t end = std::min(plan.size(), start + batch);
    std::vector<std::optional<CompositeResult>> rendered(end - start);
    auto render = [&](std::size_t k) {
      const auto& item = plan[start + k];
      rendered[k] = blend(backgrounds[item.background_index], item.recipe, assets);
    };
    if (workers == 1) {
      for (std::size_t k = 0; k < rendered.size(); ++k) render(k);
    } else {
      std::atomic<std::size_t> next{0};
      std::exception_ptr failure;
      std::mutex failure_mutex;
      std::vector<std::thread> pool;
      for (std::size_t t = 0; t < std::min(workers, rendered.size()); ++t) {
        pool.emplace_back([&] {
          for (std::size_t k = next++; k < rendered.size(); k = next++) {
            try {
              render(k);
            } catch (...) {
              std::lock_guard<std::mutex> lock(failure_mutex);
              if (!failure) failure = std::current_exception();
            }
          }
        });
      }
      for (auto& th : pool) th.join();
      if (failure) std::rethrow_exception(failure);
    }
    for (std::size_t k = 0; k < rendered.size(); ++k) {
      const auto& item = plan[start + k];
      const auto& bg = backgrounds[item.background_index].image;
      ImageEntry entry{generated_image_name(item.index), bg.width(), bg.height(),
                       rendered[k]->objects, item.origin};
      sink(item, std::move(*rendered[k]), entry);
    }
  }
}

GeneratedDataset generate_dataset(std::span<const Background> backgrounds,
                                  std::span<const ForegroundAsset> assets,
                                  std::size_t n_images, const CompositeParams& params,
                                  std::uint64_t master_seed, int jobs) {
  GeneratedDataset out;
  generate_dataset(
      backgrounds, assets, n_images, params, master_seed,
      [&](const PlannedImage&, CompositeResult&& r, const ImageEntry& e) {
        out.images.push_back(std::move(r));
        out.manifest.push_back(e);
      },
      jobs);
  return out;
}

namespace {

std::vector<fs::path> sorted_pngs(const fs::path& dir) {
  std::vector<fs::path> files;
  if (!fs::is_directory(dir)) return files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && e.path().extension() == ".png" &&
        !name.ends_with(".mask.png")) {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

std::vector<Background> load_backgrounds(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("background directory not found: " + dir);
  std::vector<Background> out;
  for (const auto& path : sorted_pngs(dir)) {
    out.push_back(Background{path.stem().string(), load_png(path.string()).rgb});
  }
  if (out.empty()) throw IoError("no PNG backgrounds in " + dir);
  return out;
}

std::vector<ForegroundAsset> load_assets(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("asset directory not found: " + dir);
  std::vector<ForegroundAsset> out;
  const std::pair<const char*, AssetKind> kinds[] = {{"real-cutout", AssetKind::kRealCutout},
                                                     {"render", AssetKind::kRender}};
  for (const auto& [sub, kind] : kinds) {
    for (const auto& path : sorted_pngs(fs::path(dir) / sub)) {
      auto loaded = load_png(path.string());
      ForegroundAsset asset;
      asset.id = std::string(sub) + "/" + path.stem().string();
      asset.kind = kind;
      asset.image = std::move(loaded.rgb);
      const fs::path mask_path = path.parent_path() / (path.stem().string() + ".mask.png");
      if (fs::exists(mask_path)) {
        asset.mask = load_mask_png(mask_path.string());
      } else if (loaded.alpha) {
        asset.mask = std::move(*loaded.alpha);
      } else {
        throw IoError("asset " + path.string() + " has neither alpha nor a .mask.png");
      }
      asset.validate();
      out.push_back(std::move(asset));
    }
  }
  if (out.empty()) throw IoError("no assets under " + dir + "/{real-cutout,render}");
  return out;
}

}  // namespace detbench
