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

// Geometric vocabulary shared by every module: normalized boxes, pixel
// rectangles, ground truth, detections and the YOLO-style text formats.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace detbench {

/// Slack allowed for float noise at the image border.
inline constexpr double kBoxEpsilon = 1e-6;

/// Normalized center-format box. This is the canonical in-memory form.
struct BoundingBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  bool valid() const;
  bool operator==(const BoundingBox&) const = default;
};

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PixelBox {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  bool valid_in(double image_w, double image_h) const;
  bool operator==(const PixelBox&) const = default;
};

struct GroundTruth {
  int class_id = 0;
  BoundingBox box;
  bool operator==(const GroundTruth&) const = default;
};

struct Detection {
  int class_id = 0;
  BoundingBox box;
  double confidence = 0.0;
  bool operator==(const Detection&) const = default;
};

enum class Origin { kRealNormal, kRealDifficult, kGenReal, kGenRender, kBackgroundOnly };

std::string_view origin_name(Origin origin);
std::optional<Origin> parse_origin(std::string_view name);

struct ImageEntry {
  std::string path;
  int width = 0;
  int height = 0;
  std::vector<GroundTruth> objects;
  Origin origin = Origin::kRealNormal;
};

/// Intersection over union of two pixel rectangles; 0 when disjoint.
double iou(const PixelBox& a, const PixelBox& b);

/// Converts between normalized and pixel coordinates for a w x h image.
/// Throws ParameterError for a degenerate size or zero-area result.
PixelBox to_pixel(const BoundingBox& box, double image_w, double image_h);
BoundingBox from_pixel(const PixelBox& box, double image_w, double image_h);

/// Parses `class cx cy w h` lines. Values within kBoxEpsilon outside [0, 1]
/// are clamped; boxes that overhang the border are clipped to the image.
/// Throws ParseError naming the 1-based line number.
std::vector<GroundTruth> parse_label_file(std::string_view text);
std::string write_label_file(const std::vector<GroundTruth>& objects);

/// Same as the label format with a trailing confidence in [0, 1].
std::vector<Detection> parse_detection_file(std::string_view text);
std::string write_detection_file(const std::vector<Detection>& detections);

/// Reads and parses a file; throws IoError when it cannot be opened.
std::vector<GroundTruth> read_label_file(const std::string& path);
std::vector<Detection> read_detection_file(const std::string& path);

std::string read_text_file(const std::string& path);
/// Writes bytes verbatim, creating parent directories.
void write_text_file(const std::string& path, std::string_view text);

}  // namespace detbench
