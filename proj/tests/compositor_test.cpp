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

#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "detbench/error.hpp"
#include "detbench/logging.hpp"
#include "detbench/rng.hpp"
#include "test_util.hpp"

using namespace detbench;

namespace {

ForegroundAsset make_asset(const std::string& id, AssetKind kind, int w, int h,
                           std::uint8_t value, bool elliptic) {
  ForegroundAsset a;
  a.id = id;
  a.kind = kind;
  a.image = Image(w, h, value);
  a.mask = Mask(w, h, 1.0f);
  if (elliptic) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double dx = (x + 0.5 - w / 2.0) / (w / 2.0);
        const double dy = (y + 0.5 - h / 2.0) / (h / 2.0);
        a.mask.at(x, y) = dx * dx + dy * dy <= 1.0 ? 1.0f : 0.0f;
      }
    }
  }
  return a;
}

std::vector<ForegroundAsset> mixed_assets() {
  return {make_asset("cut-a", AssetKind::kRealCutout, 24, 32, 180, true),
          make_asset("cut-b", AssetKind::kRealCutout, 30, 20, 90, true),
          make_asset("ren-a", AssetKind::kRender, 28, 28, 140, true),
          make_asset("ren-b", AssetKind::kRender, 16, 24, 220, false)};
}

std::vector<Background> noise_backgrounds() {
  return {Background{"bg0", testing::noise_image(320, 240, 1)},
          Background{"bg1", testing::noise_image(256, 256, 2)},
          Background{"bg2", testing::noise_image(400, 300, 3)}};
}

// True when pixel (x, y) lies farther than 4 sigma outside the rect.
bool beyond_support(const Placement& p, int x, int y) {
  const double reach = 4.0 * p.blur_sigma;
  return x < p.rect.x0 - reach || x >= p.rect.x1 + reach || y < p.rect.y0 - reach ||
         y >= p.rect.y1 + reach;
}

}  // namespace

TEST_CASE("params validation") {
  CompositeParams p;
  CHECK_NOTHROW(p.validate());
  p.dual_insert_prob = 1.5;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p = CompositeParams{};
  p.scale_range = {0.2, 0.1};
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p = CompositeParams{};
  p.top_band_fraction = 0.0;
  CHECK_THROWS_AS(p.validate(), ParameterError);
}

TEST_CASE("asset validation") {
  auto a = make_asset("x", AssetKind::kRender, 8, 8, 100, false);
  CHECK_NOTHROW(a.validate());
  a.mask = Mask(8, 8, 0.4f);
  CHECK_THROWS_AS(a.validate(), ParameterError);
  a.mask = Mask(4, 8, 1.0f);
  CHECK_THROWS_AS(a.validate(), ParameterError);
}

TEST_CASE("rects stay inside the top band") {
  const Background bg{"tall", testing::noise_image(800, 1000, 4)};
  const auto assets = mixed_assets();
  CompositeParams params;
  params.dual_insert_prob = 0.5;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    const auto r = sample_recipe(s, bg, assets, params);
    REQUIRE(r.placements.size() >= 1);
    REQUIRE(r.placements.size() <= 2);
    for (const auto& p : r.placements) {
      CHECK(p.rect.y1 <= 400.0);
      CHECK(p.rect.valid_in(800, 1000));
      CHECK(p.rect.width() >= std::lround(0.03 * 800) - 1);
      CHECK(p.rect.width() <= std::lround(0.12 * 800) + 1);
      CHECK(p.blur_sigma >= 0.5);
      CHECK(p.blur_sigma <= 1.5);
    }
    if (r.placements.size() == 2) CHECK(iou(r.placements[0].rect, r.placements[1].rect) == 0.0);
  }
}

TEST_CASE("dual insert probability 0 gives one placement") {
  const auto bgs = noise_backgrounds();
  const auto assets = mixed_assets();
  CompositeParams params;
  params.dual_insert_prob = 0.0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    CHECK(sample_recipe(s, bgs[s % 3], assets, params).placements.size() == 1);
  }
}

TEST_CASE("dual insert rate sits in the binomial band") {
  const auto bgs = noise_backgrounds();
  const auto assets = mixed_assets();
  const CompositeParams params;
  int duals = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    duals += sample_recipe(derive_seed(77, i), bgs[i % 3], assets, params).placements.size() == 2;
  }
  const double rate = static_cast<double>(duals) / n;
  CHECK(rate >= 0.013);
  CHECK(rate <= 0.028);
}

TEST_CASE("sample_recipe is deterministic") {
  const auto bgs = noise_backgrounds();
  const auto assets = mixed_assets();
  CompositeParams params;
  params.dual_insert_prob = 0.5;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto a = sample_recipe(s, bgs[0], assets, params);
    const auto b = sample_recipe(s, bgs[0], assets, params);
    REQUIRE(a.placements.size() == b.placements.size());
    for (std::size_t i = 0; i < a.placements.size(); ++i) {
      CHECK(a.placements[i].rect == b.placements[i].rect);
      CHECK(a.placements[i].blur_sigma == b.placements[i].blur_sigma);
      CHECK(a.placements[i].asset_id == b.placements[i].asset_id);
    }
  }
}

TEST_CASE("unplaceable asset names background and asset") {
  const Background flat{"flat-bg", testing::noise_image(1000, 50, 5)};
  const std::vector<ForegroundAsset> tall{make_asset("pole", AssetKind::kRender, 10, 200, 50, false)};
  CHECK_THROWS_WITH_AS(sample_recipe(1, flat, tall, CompositeParams{}),
                       doctest::Contains("flat-bg"), UnplaceableError);
  CHECK_THROWS_WITH_AS(sample_recipe(1, flat, tall, CompositeParams{}), doctest::Contains("pole"),
                       UnplaceableError);
}

TEST_CASE("second placement falls back to one after exhausting attempts") {
  const Background bg{"bg", testing::noise_image(100, 100, 6)};
  const std::vector<ForegroundAsset> wide{make_asset("w", AssetKind::kRender, 40, 10, 50, false)};
  CompositeParams params;
  params.dual_insert_prob = 1.0;
  params.scale_range = {1.0, 1.0};
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto r = sample_recipe(s, bg, wide, params);
    CHECK(r.placements.size() == 1);
    CHECK(r.placements[0].rect.width() == 100);
  }
}

TEST_CASE("adapt_brightness examples against brute-force means") {
  auto brute_mean = [](const Image& img, const Mask* mask, const PixelBox& rect) {
    double sum = 0.0;
    long n = 0;
    for (int y = int(rect.y0); y < int(rect.y1); ++y) {
      for (int x = int(rect.x0); x < int(rect.x1); ++x) {
        if (mask && mask->at(x, y) <= 0.5f) continue;
        sum += 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
        ++n;
      }
    }
    return sum / n;
  };
  const CompositeParams params;
  const PixelBox region{10, 10, 30, 30};

  // Matched luminance.
  const Image bg120(64, 64, 120);
  const Image fg120(16, 16, 120);
  const Mask full(16, 16, 1.0f);
  CHECK(adapt_brightness(fg120, full, bg120, region, params) == doctest::Approx(1.0));

  // Textured background averaging 60 against an asset averaging 120 under its mask.
  Image bg(64, 64, 0);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      const std::uint8_t v = (x + y) % 2 == 0 ? 40 : 80;
      for (int c = 0; c < 3; ++c) bg.at(x, y, c) = v;
    }
  }
  Image fg(16, 16, 0);
  Mask m(16, 16, 0.0f);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const bool inside = x >= 4 && x < 12;
      m.at(x, y) = inside ? 1.0f : 0.0f;
      const std::uint8_t v = inside ? ((x + y) % 2 == 0 ? 100 : 140) : 250;
      for (int c = 0; c < 3; ++c) fg.at(x, y, c) = v;
    }
  }
  const double bg_mean = brute_mean(bg, nullptr, region);
  const double fg_mean = brute_mean(fg, &m, PixelBox{0, 0, 16, 16});
  CHECK(bg_mean == doctest::Approx(60.0));
  CHECK(fg_mean == doctest::Approx(120.0));
  CHECK(adapt_brightness(fg, m, bg, region, params) == doctest::Approx(bg_mean / fg_mean));
  CHECK(adapt_brightness(fg, m, bg, region, params) == doctest::Approx(0.5));

  // Clamp boundary: 255 / 10 = 25.5 clamps to 2.5.
  const Image bright(64, 64, 255);
  const Image dark(16, 16, 10);
  CHECK(adapt_brightness(dark, full, bright, region, params) == doctest::Approx(2.5));

  // Blend factor halves the correction.
  CompositeParams half = params;
  half.brightness_blend = 0.5;
  CHECK(adapt_brightness(fg, m, bg, region, half) == doctest::Approx(0.75));

  // Black asset: no adjustment.
  set_log_level(LogLevel::kQuiet);
  const Image black(16, 16, 0);
  CHECK(adapt_brightness(black, full, bg, region, params) == 1.0);
  set_log_level(LogLevel::kWarning);
}

TEST_CASE("opaque paste reproduces the resized asset") {
  const Background bg{"bg", testing::noise_image(120, 90, 8)};
  ForegroundAsset asset;
  asset.id = "tex";
  asset.kind = AssetKind::kRender;
  asset.image = testing::noise_image(20, 15, 9);
  asset.mask = Mask(20, 15, 1.0f);
  const std::vector<ForegroundAsset> assets{asset};
  CompositeRecipe recipe;
  recipe.background_id = "bg";
  recipe.placements.push_back(Placement{"tex", PixelBox{30, 10, 70, 40}, 0.0, 1.0});
  const auto out = blend(bg, recipe, assets);
  const Image resized = resize_bilinear(asset.image, 40, 30);
  for (int y = 0; y < 90; ++y) {
    for (int x = 0; x < 120; ++x) {
      const bool inside = x >= 30 && x < 70 && y >= 10 && y < 40;
      for (int c = 0; c < 3; ++c) {
        if (inside) {
          REQUIRE(out.image.at(x, y, c) == resized.at(x - 30, y - 10, c));
        } else {
          REQUIRE(out.image.at(x, y, c) == bg.image.at(x, y, c));
        }
      }
    }
  }
  REQUIRE(out.objects.size() == 1);
  const BoundingBox expect{50.0 / 120, 25.0 / 90, 40.0 / 120, 30.0 / 90};
  CHECK(std::abs(out.objects[0].box.cx - expect.cx) <= 1e-6);
  CHECK(std::abs(out.objects[0].box.cy - expect.cy) <= 1e-6);
  CHECK(std::abs(out.objects[0].box.w - expect.w) <= 1e-6);
  CHECK(std::abs(out.objects[0].box.h - expect.h) <= 1e-6);
}

TEST_CASE("transparent paste leaves the background untouched") {
  const Background bg{"bg", testing::noise_image(100, 80, 10)};
  ForegroundAsset asset;
  asset.id = "ghost";
  asset.image = Image(10, 10, 255);
  asset.mask = Mask(10, 10, 0.0f);
  const std::vector<ForegroundAsset> assets{asset};
  CompositeRecipe recipe;
  recipe.placements.push_back(Placement{"ghost", PixelBox{5, 5, 45, 25}, 1.2, 1.0});
  const auto out = blend(bg, recipe, assets);
  CHECK(out.image == bg.image);
  CHECK(out.objects.size() == 1);
}

TEST_CASE("blend rejects inconsistent recipes") {
  const Background bg{"bg", testing::noise_image(50, 50, 11)};
  const std::vector<ForegroundAsset> assets{make_asset("a", AssetKind::kRender, 8, 8, 100, false)};
  CompositeRecipe r;
  r.placements.push_back(Placement{"a", PixelBox{40, 40, 60, 60}, 0.5, 1.0});
  CHECK_THROWS_AS(blend(bg, r, assets), Error);
  r.placements[0] = Placement{"missing", PixelBox{0, 0, 10, 10}, 0.5, 1.0};
  CHECK_THROWS_AS(blend(bg, r, assets), Error);
}

TEST_CASE("pixels beyond 4 sigma are bit-identical to the background") {
  const auto bgs = noise_backgrounds();
  const auto assets = mixed_assets();
  CompositeParams params;
  params.dual_insert_prob = 0.3;
  params.blur_sigma_range = {0.5, 3.0};
  const auto data = generate_dataset(bgs, assets, 100, params, 1234);
  const auto plan = plan_dataset(bgs, assets, 100, params, 1234);
  REQUIRE(data.images.size() == 100);
  long audited = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    const Image& bg = bgs[plan[i].background_index].image;
    const auto& img = data.images[i];
    for (int y = 0; y < bg.height(); ++y) {
      for (int x = 0; x < bg.width(); ++x) {
        bool far = true;
        for (const auto& p : img.recipe.placements) far = far && beyond_support(p, x, y);
        if (!far) continue;
        ++audited;
        for (int c = 0; c < 3; ++c) REQUIRE(img.image.at(x, y, c) == bg.at(x, y, c));
      }
    }
  }
  CHECK(audited > 0);
}

TEST_CASE("annotation fidelity against the pasted footprint") {
  // Black background, white opaque asset: pixels with feathered alpha > 0.5
  // are the ones brighter than half the pasted value.
  const std::vector<Background> bgs{Background{"black", Image(300, 200, 0)}};
  const std::vector<ForegroundAsset> assets{
      make_asset("white", AssetKind::kRender, 20, 30, 255, false)};
  CompositeParams params;
  params.dual_insert_prob = 0.0;
  params.blur_sigma_range = {0.5, 2.5};
  const auto data = generate_dataset(bgs, assets, 50, params, 99);
  for (const auto& res : data.images) {
    const auto& p = res.recipe.placements.at(0);
    const double pasted = std::min(255.0, std::round(255.0 * p.gain));
    int x0 = 1 << 30, y0 = 1 << 30, x1 = -1, y1 = -1;
    for (int y = 0; y < 200; ++y) {
      for (int x = 0; x < 300; ++x) {
        if (res.image.at(x, y, 0) > pasted / 2.0) {
          x0 = std::min(x0, x);
          y0 = std::min(y0, y);
          x1 = std::max(x1, x + 1);
          y1 = std::max(y1, y + 1);
        }
      }
    }
    REQUIRE(x1 > x0);
    const double tol = 4.0 * p.blur_sigma;
    const PixelBox gt = to_pixel(res.objects.at(0).box, 300, 200);
    CHECK(gt.x0 >= x0 - tol - 1e-6);
    CHECK(gt.y0 >= y0 - tol - 1e-6);
    CHECK(gt.x1 <= x1 + tol + 1e-6);
    CHECK(gt.y1 <= y1 + tol + 1e-6);
  }
}

TEST_CASE("generate_dataset is deterministic and parallel-safe") {
  const auto bgs = noise_backgrounds();
  const auto assets = mixed_assets();
  const CompositeParams params;
  const auto a = generate_dataset(bgs, assets, 1, params, 5);
  const auto b = generate_dataset(bgs, assets, 1, params, 5);
  CHECK(a.images[0].image == b.images[0].image);
  CHECK(write_label_file(a.images[0].objects) == write_label_file(b.images[0].objects));

  const auto serial = generate_dataset(bgs, assets, 24, params, 17, 1);
  const auto parallel = generate_dataset(bgs, assets, 24, params, 17, 4);
  for (std::size_t i = 0; i < 24; ++i) {
    CHECK(serial.images[i].image == parallel.images[i].image);
    CHECK(serial.manifest[i].path == parallel.manifest[i].path);
  }
  CHECK_FALSE(generate_dataset(bgs, assets, 1, params, 6).images[0].image == a.images[0].image);
}

TEST_CASE("origin tags follow asset kinds") {
  const auto bgs = noise_backgrounds();
  const auto assets = mixed_assets();
  const auto data = generate_dataset(bgs, assets, 100, CompositeParams{}, 2025);
  int real = 0, render = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    const auto& entry = data.manifest[i];
    CHECK(entry.path == generated_image_name(i));
    bool any_real = false;
    for (const auto& p : data.images[i].recipe.placements) any_real |= p.asset_id.rfind("cut", 0) == 0;
    CHECK(entry.origin == (any_real ? Origin::kGenReal : Origin::kGenRender));
    real += entry.origin == Origin::kGenReal;
    render += entry.origin == Origin::kGenRender;
  }
  CHECK(real >= 20);
  CHECK(render >= 20);
}

TEST_CASE("containment of generated boxes") {
  const auto bgs = noise_backgrounds();
  const auto assets = mixed_assets();
  const CompositeParams params;
  const auto plan = plan_dataset(bgs, assets, 2000, params, 8);
  for (const auto& item : plan) {
    const Image& bg = bgs[item.background_index].image;
    for (const auto& p : item.recipe.placements) {
      const auto box = from_pixel(p.rect, bg.width(), bg.height());
      CHECK(box.cy + box.h / 2 <= 0.4 + 1e-6);
    }
  }
}

TEST_CASE("unplaceable images are resampled within the attempt budget") {
  set_log_level(LogLevel::kQuiet);
  const std::vector<Background> bgs{Background{"short", testing::noise_image(1000, 40, 1)},
                                    Background{"ok", testing::noise_image(400, 400, 2)}};
  const std::vector<ForegroundAsset> assets{make_asset("pole", AssetKind::kRender, 10, 40, 50, false)};
  const auto plan = plan_dataset(bgs, assets, 30, CompositeParams{}, 3);
  CHECK(plan.size() == 30);
  for (const auto& item : plan) CHECK(item.background_index == 1);

  const std::vector<Background> only_short{bgs[0]};
  CHECK_THROWS_AS(plan_dataset(only_short, assets, 5, CompositeParams{}, 3), UnplaceableError);
  set_log_level(LogLevel::kWarning);
}

TEST_CASE("feather radius and top band") {
  CHECK(feather_radius(0.0) == 0);
  CHECK(feather_radius(0.5) == 2);
  CHECK(feather_radius(1.3) == 5);
  CHECK(top_band_pixels(1000, 0.4) == 400);
  CHECK(top_band_pixels(640, 0.4) == 256);
}

TEST_CASE("asset and background loading from disk") {
  testing::ScratchDir dir("compositor");
  const auto root = dir.path();
  std::filesystem::create_directories(root / "bg");
  std::filesystem::create_directories(root / "assets" / "real-cutout");
  std::filesystem::create_directories(root / "assets" / "render");
  save_png((root / "bg" / "b0.png").string(), testing::noise_image(64, 48, 1));
  save_png((root / "assets" / "real-cutout" / "c0.png").string(), Image(8, 8, 200));
  save_png((root / "assets" / "real-cutout" / "c0.mask.png").string(), Image(8, 8, 255));
  save_png((root / "assets" / "render" / "r0.png").string(), Image(6, 6, 100));
  save_png((root / "assets" / "render" / "r0.mask.png").string(), Image(6, 6, 255));
  const auto bgs = load_backgrounds((root / "bg").string());
  REQUIRE(bgs.size() == 1);
  CHECK(bgs[0].image.width() == 64);
  const auto assets = load_assets((root / "assets").string());
  REQUIRE(assets.size() == 2);
  std::set<AssetKind> kinds;
  for (const auto& a : assets) {
    kinds.insert(a.kind);
    CHECK(a.mask.at(0, 0) == doctest::Approx(1.0f));
  }
  CHECK(kinds.size() == 2);
}
