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

#include "detbench/annotation.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "detbench/error.hpp"

namespace detbench {
namespace {

bool in_unit(double v) { return v >= -kBoxEpsilon && v <= 1.0 + kBoxEpsilon; }

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

double parse_real(std::string_view field, const char* name, int line) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw ParseError("non-numeric " + std::string(name) + " '" + std::string(field) + "'",
                     line);
  }
  return value;
}

int parse_class(std::string_view field, int line) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError("non-numeric class id '" + std::string(field) + "'", line);
  }
  if (value < 0) throw ParseError("negative class id", line);
  return value;
}

double unit_field(std::string_view field, const char* name, int line) {
  const double v = parse_real(field, name, line);
  if (!in_unit(v)) {
    throw ParseError(std::string(name) + " = " + std::string(field) + " outside [0,1]", line);
  }
  return std::clamp(v, 0.0, 1.0);
}

// Clips an axis [c - s/2, c + s/2] to [0, 1] when it overhangs by more than
// the float slack. Returns false if nothing is left.
bool clip_axis(double& c, double& s) {
  double lo = c - s / 2.0;
  double hi = c + s / 2.0;
  if (lo >= -kBoxEpsilon && hi <= 1.0 + kBoxEpsilon) return s > 0.0;
  lo = std::max(lo, 0.0);
  hi = std::min(hi, 1.0);
  if (!(hi > lo)) return false;
  c = (lo + hi) / 2.0;
  s = hi - lo;
  return true;
}

BoundingBox parse_box(const std::vector<std::string_view>& f, int line) {
  BoundingBox box{unit_field(f[1], "cx", line), unit_field(f[2], "cy", line),
                  unit_field(f[3], "w", line), unit_field(f[4], "h", line)};
  if (!clip_axis(box.cx, box.w)) throw ParseError("box has zero width", line);
  if (!clip_axis(box.cy, box.h)) throw ParseError("box has zero height", line);
  return box;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  int number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? end : end - pos);
    ++number;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto fields = split_fields(line);
    if (!fields.empty()) fn(fields, number);
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
}

void append_box(std::string& out, int class_id, const BoundingBox& b) {
  std::array<char, 128> buf{};
  std::snprintf(buf.data(), buf.size(), "%d %.6f %.6f %.6f %.6f", class_id, b.cx, b.cy, b.w,
                b.h);
  out += buf.data();
}

}  // namespace

bool BoundingBox::valid() const {
  if (!(w > 0.0 && h > 0.0) || !std::isfinite(cx) || !std::isfinite(cy)) return false;
  if (!in_unit(cx) || !in_unit(cy) || !in_unit(w) || !in_unit(h)) return false;
  return cx - w / 2.0 >= -kBoxEpsilon && cx + w / 2.0 <= 1.0 + kBoxEpsilon &&
         cy - h / 2.0 >= -kBoxEpsilon && cy + h / 2.0 <= 1.0 + kBoxEpsilon;
}

bool PixelBox::valid_in(double image_w, double image_h) const {
  return x0 >= 0.0 && y0 >= 0.0 && x0 < x1 && y0 < y1 && x1 <= image_w && y1 <= image_h;
}

std::string_view origin_name(Origin origin) {
  switch (origin) {
    case Origin::kRealNormal: return "real-normal";
    case Origin::kRealDifficult: return "real-difficult";
    case Origin::kGenReal: return "gen-real";
    case Origin::kGenRender: return "gen-render";
    case Origin::kBackgroundOnly: return "background-only";
  }
  return "unknown";
}

std::optional<Origin> parse_origin(std::string_view name) {
  for (Origin o : {Origin::kRealNormal, Origin::kRealDifficult, Origin::kGenReal,
                   Origin::kGenRender, Origin::kBackgroundOnly}) {
    if (origin_name(o) == name) return o;
  }
  return std::nullopt;
}

double iou(const PixelBox& a, const PixelBox& b) {
  if (a == b) return 1.0;
  const double iw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double ih = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

PixelBox to_pixel(const BoundingBox& box, double image_w, double image_h) {
  if (!(image_w >= 1.0 && image_h >= 1.0)) throw ParameterError("image size must be >= 1");
  PixelBox p{(box.cx - box.w / 2.0) * image_w, (box.cy - box.h / 2.0) * image_h,
             (box.cx + box.w / 2.0) * image_w, (box.cy + box.h / 2.0) * image_h};
  if (!(p.x1 > p.x0 && p.y1 > p.y0)) throw ParameterError("degenerate pixel box");
  return p;
}

BoundingBox from_pixel(const PixelBox& box, double image_w, double image_h) {
  if (!(image_w >= 1.0 && image_h >= 1.0)) throw ParameterError("image size must be >= 1");
  if (!(box.x1 > box.x0 && box.y1 > box.y0)) throw ParameterError("degenerate pixel box");
  return BoundingBox{(box.x0 + box.x1) / 2.0 / image_w, (box.y0 + box.y1) / 2.0 / image_h,
                     (box.x1 - box.x0) / image_w, (box.y1 - box.y0) / image_h};
}

std::vector<GroundTruth> parse_label_file(std::string_view text) {
  std::vector<GroundTruth> out;
  for_each_line(text, [&](const std::vector<std::string_view>& f, int line) {
    if (f.size() != 5) {
      throw ParseError("expected 5 fields, got " + std::to_string(f.size()), line);
    }
    out.push_back(GroundTruth{parse_class(f[0], line), parse_box(f, line)});
  });
  return out;
}

std::string write_label_file(const std::vector<GroundTruth>& objects) {
  std::string out;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& gt = objects[i];
    if (gt.class_id < 0 || !gt.box.valid()) {
      throw ParameterError("refusing to serialize invalid box at index " + std::to_string(i));
    }
    if (i) out += '\n';
    append_box(out, gt.class_id, gt.box);
  }
  return out;
}

std::vector<Detection> parse_detection_file(std::string_view text) {
  std::vector<Detection> out;
  for_each_line(text, [&](const std::vector<std::string_view>& f, int line) {
    if (f.size() != 6) {
      throw ParseError("expected 6 fields, got " + std::to_string(f.size()), line);
    }
    const double conf = parse_real(f[5], "confidence", line);
    if (!(conf >= 0.0 && conf <= 1.0)) {
      throw ParseError("confidence " + std::string(f[5]) + " outside [0,1]", line);
    }
    out.push_back(Detection{parse_class(f[0], line), parse_box(f, line), conf});
  });
  return out;
}

std::string write_detection_file(const std::vector<Detection>& detections) {
  std::string out;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const auto& d = detections[i];
    if (d.class_id < 0 || !d.box.valid() || !(d.confidence >= 0.0 && d.confidence <= 1.0)) {
      throw ParameterError("refusing to serialize invalid detection at index " +
                           std::to_string(i));
    }
    if (i) out += '\n';
    append_box(out, d.class_id, d.box);
    std::array<char, 32> buf{};
    std::snprintf(buf.data(), buf.size(), " %.6f", d.confidence);
    out += buf.data();
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("short write to " + path);
}

std::vector<GroundTruth> read_label_file(const std::string& path) {
  try {
    return parse_label_file(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::vector<Detection> read_detection_file(const std::string& path) {
  try {
    return parse_detection_file(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace detbench
