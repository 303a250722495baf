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

#include "detbench/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <set>

#include "json.hpp"

#include "detbench/error.hpp"
#include "detbench/rng.hpp"

namespace detbench {
namespace {

inline int reflect101(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n - 2;
  i = std::abs(i) % period;
  return i >= n ? period - i : i;
}

inline std::uint8_t saturate(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

double Kernel2D::sum() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

Image convolve(const Image& image, const Kernel2D& kernel) {
  struct Tap {
    int dx, dy;
    double w;
  };
  std::vector<Tap> taps;
  const int r = kernel.size / 2;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      if (const double w = kernel.at(dx, dy); w != 0.0) taps.push_back({dx, dy, w});
    }
  }
  const int w = image.width();
  const int h = image.height();
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::array<double, Image::kChannels> acc{};
      for (const Tap& t : taps) {
        const int sx = reflect101(x + t.dx, w);
        const int sy = reflect101(y + t.dy, h);
        for (int c = 0; c < Image::kChannels; ++c) acc[c] += t.w * image.at(sx, sy, c);
      }
      for (int c = 0; c < Image::kChannels; ++c) out.at(x, y, c) = saturate(acc[c]);
    }
  }
  return out;
}

Image autocontrast(const Image& image, double cutoff_fraction) {
  if (!(cutoff_fraction >= 0.0 && cutoff_fraction < 0.5)) {
    throw ParameterError("autocontrast cutoff must be in [0, 0.5)");
  }
  Image out = image;
  const std::size_t n = static_cast<std::size_t>(image.width()) * image.height();
  if (n == 0) return out;
  const double cut = cutoff_fraction * static_cast<double>(n);
  for (int c = 0; c < Image::kChannels; ++c) {
    std::array<std::size_t, 256> hist{};
    for (std::size_t i = 0; i < n; ++i) ++hist[image.data()[i * Image::kChannels + c]];
    int low = 0;
    for (std::size_t cum = 0; low < 256; ++low) {
      cum += hist[low];
      if (static_cast<double>(cum) > cut) break;
    }
    int high = 255;
    for (std::size_t cum = 0; high >= 0; --high) {
      cum += hist[high];
      if (static_cast<double>(cum) > cut) break;
    }
    if (high <= low) continue;
    std::array<std::uint8_t, 256> lut{};
    for (int v = 0; v < 256; ++v) lut[v] = saturate(255.0 * (v - low) / (high - low));
    for (std::size_t i = 0; i < n; ++i) {
      auto& px = out.data()[i * Image::kChannels + c];
      px = lut[px];
    }
  }
  return out;
}

Image illumination(const Image& image, double angle_deg, double strength) {
  if (!(strength >= 0.0 && strength <= 1.0)) {
    throw ParameterError("illumination strength must be in [0, 1]");
  }
  if (strength == 0.0) return image;
  const double ux = std::cos(angle_deg * kDegToRad);
  const double uy = std::sin(angle_deg * kDegToRad);
  const int w = image.width();
  const int h = image.height();
  double pmin = 0.0;
  double pmax = 0.0;
  for (const auto [cx, cy] : {std::array<int, 2>{0, 0}, {w - 1, 0}, {0, h - 1}, {w - 1, h - 1}}) {
    const double p = cx * ux + cy * uy;
    pmin = std::min(pmin, p);
    pmax = std::max(pmax, p);
  }
  const double span = pmax - pmin;
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double t = span > 1e-12 ? (x * ux + y * uy - pmin) / span : 0.5;
      const double factor = 1.0 - strength + 2.0 * strength * t;
      for (int c = 0; c < Image::kChannels; ++c) out.at(x, y, c) = saturate(image.at(x, y, c) * factor);
    }
  }
  return out;
}

Kernel2D motion_blur_kernel(int length, double angle_deg) {
  if (length < 3 || length % 2 == 0) {
    throw ParameterError("motion blur length must be odd and >= 3, got " + std::to_string(length));
  }
  Kernel2D k;
  k.size = length;
  k.weights.assign(static_cast<std::size_t>(length) * length, 0.0);
  const int r = length / 2;
  const double ux = std::cos(angle_deg * kDegToRad);
  const double uy = std::sin(angle_deg * kDegToRad);
  for (int i = -r; i <= r; ++i) {
    const int dx = static_cast<int>(std::lround(i * ux));
    const int dy = static_cast<int>(std::lround(i * uy));
    k.weights[static_cast<std::size_t>(dy + r) * length + (dx + r)] += 1.0;
  }
  for (double& v : k.weights) v /= length;
  return k;
}

Image motion_blur(const Image& image, int length, double angle_deg) {
  return convolve(image, motion_blur_kernel(length, angle_deg));
}

Kernel2D defocus_kernel(double radius) {
  if (!(radius >= 1.0)) throw ParameterError("defocus radius must be >= 1");
  const int r = static_cast<int>(std::floor(radius));
  Kernel2D k;
  k.size = 2 * r + 1;
  k.weights.assign(static_cast<std::size_t>(k.size) * k.size, 0.0);
  const double r2 = radius * radius + 1e-9;
  std::size_t inside = 0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      if (dx * dx + dy * dy <= r2) {
        k.weights[static_cast<std::size_t>(dy + r) * k.size + (dx + r)] = 1.0;
        ++inside;
      }
    }
  }
  for (double& v : k.weights) v /= static_cast<double>(inside);
  return k;
}

Image defocus(const Image& image, double radius) { return convolve(image, defocus_kernel(radius)); }

Image chromatic_aberration(const Image& image, double shift) {
  if (!(shift >= 0.0)) throw ParameterError("chromatic aberration shift must be >= 0");
  if (shift == 0.0 || image.empty()) return image;
  const int w = image.width();
  const int h = image.height();
  const double rel = shift / std::max(w, h);
  const double cx = (w - 1) / 2.0;
  const double cy = (h - 1) / 2.0;
  Image out = image;
  const std::pair<int, double> scaled[] = {{0, 1.0 + rel}, {2, 1.0 - rel}};
  for (const auto& [channel, scale] : scaled) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double sx = cx + (x - cx) / scale;
        const double sy = cy + (y - cy) / scale;
        out.at(x, y, channel) = saturate(sample_bilinear(image, sx, sy, channel));
      }
    }
  }
  return out;
}

Image iso_noise(const Image& image, double color_shift, double intensity, std::uint64_t seed) {
  if (!(color_shift >= 0.0 && intensity >= 0.0)) {
    throw ParameterError("ISO noise deviations must be >= 0");
  }
  if (color_shift == 0.0 && intensity == 0.0) return image;
  Rng rng(seed);
  const double sl = intensity * 255.0;
  const double sc = color_shift * 255.0;
  Image out(image.width(), image.height());
  const auto src = image.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); i += Image::kChannels) {
    const double shared = sl * rng.normal();
    for (int c = 0; c < Image::kChannels; ++c) {
      dst[i + c] = saturate(src[i + c] + shared + sc * rng.normal());
    }
  }
  return out;
}

std::string_view kernel_name(KernelId id) {
  switch (id) {
    case KernelId::kAutocontrast: return "autocontrast";
    case KernelId::kIllumination: return "illumination";
    case KernelId::kMotionBlur: return "motion-blur";
    case KernelId::kDefocus: return "defocus";
    case KernelId::kChromaticAberration: return "chromatic-aberration";
    case KernelId::kIsoNoise: return "iso-noise";
  }
  return "unknown";
}

std::optional<KernelId> parse_kernel_id(std::string_view name) {
  for (int i = 0; i < 6; ++i) {
    if (kernel_name(static_cast<KernelId>(i)) == name) return static_cast<KernelId>(i);
  }
  return std::nullopt;
}

namespace {

KernelParams default_params(KernelId id) {
  switch (id) {
    case KernelId::kAutocontrast: return AutocontrastParams{};
    case KernelId::kIllumination: return IlluminationParams{};
    case KernelId::kMotionBlur: return MotionBlurParams{};
    case KernelId::kDefocus: return DefocusParams{};
    case KernelId::kChromaticAberration: return ChromaticAberrationParams{};
    case KernelId::kIsoNoise: return IsoNoiseParams{};
  }
  return AutocontrastParams{};
}

void check_range(const Range& r, std::string_view kernel, const char* field, double lo,
                 double hi) {
  if (!(r.min <= r.max && r.min >= lo && r.max <= hi)) {
    throw ParameterError(std::string(kernel) + "." + field + " must satisfy " +
                         std::to_string(lo) + " <= min <= max <= " + std::to_string(hi));
  }
}

struct Validator {
  std::string_view name;
  void operator()(const AutocontrastParams& p) const {
    check_range(p.cutoff, name, "cutoff", 0.0, 0.4999999);
  }
  void operator()(const IlluminationParams& p) const {
    check_range(p.strength, name, "strength", 0.0, 1.0);
    check_range(p.angle_deg, name, "angle_deg", -1e9, 1e9);
  }
  void operator()(const MotionBlurParams& p) const {
    if (p.lengths.empty()) throw ParameterError("motion-blur.lengths is empty");
    for (int l : p.lengths) {
      if (l < 3 || l % 2 == 0) throw ParameterError("motion-blur lengths must be odd and >= 3");
    }
    check_range(p.angle_deg, name, "angle_deg", -1e9, 1e9);
  }
  void operator()(const DefocusParams& p) const {
    if (p.radii.empty()) throw ParameterError("defocus.radii is empty");
    for (int r : p.radii) {
      if (r < 1) throw ParameterError("defocus radii must be >= 1");
    }
  }
  void operator()(const ChromaticAberrationParams& p) const {
    check_range(p.shift, name, "shift", 0.0, 1e9);
  }
  void operator()(const IsoNoiseParams& p) const {
    check_range(p.color_shift, name, "color_shift", 0.0, 1e9);
    check_range(p.intensity, name, "intensity", 0.0, 1e9);
  }
};

}  // namespace

void AugmentationSpec::validate() const {
  std::set<KernelId> seen;
  for (const auto& k : kernels) {
    if (!seen.insert(k.id()).second) {
      throw ParameterError("duplicate kernel " + std::string(kernel_name(k.id())));
    }
    if (!(k.probability >= 0.0 && k.probability <= 1.0)) {
      throw ParameterError(std::string(kernel_name(k.id())) + ".probability must be in [0, 1]");
    }
    std::visit(Validator{kernel_name(k.id())}, k.params);
  }
}

AugmentationSpec default_augmentation_spec() {
  AugmentationSpec spec;
  for (int i = 0; i < 6; ++i) {
    spec.kernels.push_back(KernelConfig{default_params(static_cast<KernelId>(i)), 0.2, true});
  }
  return spec;
}

namespace {

using nlohmann::json;

Range read_range(const json& obj, const char* key, Range fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (v.is_number()) return Range{v.get<double>(), v.get<double>()};
  if (!v.is_array() || v.size() != 2) {
    throw ParseError(std::string(key) + " must be [min, max]");
  }
  return Range{v[0].get<double>(), v[1].get<double>()};
}

std::vector<int> read_ints(const json& obj, const char* key, std::vector<int> fallback) {
  if (!obj.contains(key)) return fallback;
  return obj.at(key).get<std::vector<int>>();
}

json range_json(const Range& r) { return json::array({r.min, r.max}); }

}  // namespace

AugmentationSpec parse_augmentation_spec(std::string_view json_text) {
  AugmentationSpec spec;
  try {
    const json doc = json::parse(json_text);
    for (const auto& item : doc.at("kernels")) {
      const std::string name = item.at("kernel").get<std::string>();
      const auto id = parse_kernel_id(name);
      if (!id) throw ParseError("unknown kernel '" + name + "'");
      KernelConfig cfg{default_params(*id), item.value("probability", 0.2),
                       item.value("enabled", true)};
      std::visit(
          [&](auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, AutocontrastParams>) {
              p.cutoff = read_range(item, "cutoff", p.cutoff);
            } else if constexpr (std::is_same_v<T, IlluminationParams>) {
              p.strength = read_range(item, "strength", p.strength);
              p.angle_deg = read_range(item, "angle_deg", p.angle_deg);
            } else if constexpr (std::is_same_v<T, MotionBlurParams>) {
              p.lengths = read_ints(item, "lengths", p.lengths);
              p.angle_deg = read_range(item, "angle_deg", p.angle_deg);
            } else if constexpr (std::is_same_v<T, DefocusParams>) {
              p.radii = read_ints(item, "radii", p.radii);
            } else if constexpr (std::is_same_v<T, ChromaticAberrationParams>) {
              p.shift = read_range(item, "shift", p.shift);
            } else {
              p.color_shift = read_range(item, "color_shift", p.color_shift);
              p.intensity = read_range(item, "intensity", p.intensity);
            }
          },
          cfg.params);
      spec.kernels.push_back(std::move(cfg));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("augmentation config: ") + e.what());
  }
  try {
    spec.validate();
  } catch (const ParameterError& e) {
    throw ParseError(std::string("augmentation config: ") + e.what());
  }
  return spec;
}

std::string write_augmentation_spec(const AugmentationSpec& spec) {
  json kernels = json::array();
  for (const auto& k : spec.kernels) {
    json item = {{"kernel", std::string(kernel_name(k.id()))},
                 {"enabled", k.enabled},
                 {"probability", k.probability}};
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, AutocontrastParams>) {
            item["cutoff"] = range_json(p.cutoff);
          } else if constexpr (std::is_same_v<T, IlluminationParams>) {
            item["strength"] = range_json(p.strength);
            item["angle_deg"] = range_json(p.angle_deg);
          } else if constexpr (std::is_same_v<T, MotionBlurParams>) {
            item["lengths"] = p.lengths;
            item["angle_deg"] = range_json(p.angle_deg);
          } else if constexpr (std::is_same_v<T, DefocusParams>) {
            item["radii"] = p.radii;
          } else if constexpr (std::is_same_v<T, ChromaticAberrationParams>) {
            item["shift"] = range_json(p.shift);
          } else {
            item["color_shift"] = range_json(p.color_shift);
            item["intensity"] = range_json(p.intensity);
          }
        },
        k.params);
    kernels.push_back(std::move(item));
  }
  return json{{"kernels", kernels}}.dump(2) + "\n";
}

AugmentResult apply_spec(const Image& image, const AugmentationSpec& spec, std::uint64_t seed) {
  spec.validate();
  AugmentResult result{image, {}};
  for (std::size_t i = 0; i < spec.kernels.size(); ++i) {
    const KernelConfig& cfg = spec.kernels[i];
    if (!cfg.enabled) continue;
    Rng rng(derive_seed(seed, i));
    if (!rng.bernoulli(cfg.probability)) continue;
    AppliedKernel applied{cfg.id(), {}};
    auto draw = [&](const Range& r) { return rng.uniform(r.min, r.max); };
    auto pick = [&](const std::vector<int>& v) {
      return v[static_cast<std::size_t>(rng.uniform_int(0, std::ssize(v) - 1))];
    };
    Image& img = result.image;
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, AutocontrastParams>) {
            const double cutoff = draw(p.cutoff);
            applied.params = {{"cutoff", cutoff}};
            img = autocontrast(img, cutoff);
          } else if constexpr (std::is_same_v<T, IlluminationParams>) {
            const double strength = draw(p.strength);
            const double angle = draw(p.angle_deg);
            applied.params = {{"strength", strength}, {"angle_deg", angle}};
            img = illumination(img, angle, strength);
          } else if constexpr (std::is_same_v<T, MotionBlurParams>) {
            const int length = pick(p.lengths);
            const double angle = draw(p.angle_deg);
            applied.params = {{"length", length}, {"angle_deg", angle}};
            img = motion_blur(img, length, angle);
          } else if constexpr (std::is_same_v<T, DefocusParams>) {
            const int radius = pick(p.radii);
            applied.params = {{"radius", radius}};
            img = defocus(img, radius);
          } else if constexpr (std::is_same_v<T, ChromaticAberrationParams>) {
            const double shift = draw(p.shift);
            applied.params = {{"shift", shift}};
            img = chromatic_aberration(img, shift);
          } else {
            const double color = draw(p.color_shift);
            const double intensity = draw(p.intensity);
            applied.params = {{"color_shift", color}, {"intensity", intensity}};
            img = iso_noise(img, color, intensity, rng.next_u64());
          }
        },
        cfg.params);
    result.applied.push_back(std::move(applied));
  }
  return result;
}

}  // namespace detbench
