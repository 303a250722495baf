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

// mAP@0.5 evaluation: greedy confidence-ordered matching, all-point
// interpolated average precision, and the test-average / test-difference
// model selection rule.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detbench/annotation.hpp"

namespace detbench {

inline constexpr double kDefaultIouThreshold = 0.5;

/// IoU of two normalized boxes. IoU is invariant to per-axis scaling, so no
/// image size is needed.
double box_iou(const BoundingBox& a, const BoundingBox& b);

struct MatchedDetection {
  std::size_t det_index = 0;  // index into the input detection list
  double confidence = 0.0;
  bool true_positive = false;
  std::optional<std::size_t> gt_index;
  double iou = 0.0;
};

struct MatchOutcome {
  std::vector<MatchedDetection> detections;  // descending confidence, stable
  std::size_t total_gts = 0;
  std::size_t unmatched_gts = 0;  // false negatives
};

/// Greedy matching: each detection, by descending confidence (ties in input
/// order), takes the unmatched same-class GT with the highest IoU if that IoU
/// reaches the threshold.
MatchOutcome match(std::span<const GroundTruth> gts, std::span<const Detection> dets,
                   double iou_threshold = kDefaultIouThreshold);

struct PRCurve {
  std::vector<double> precision;
  std::vector<double> recall;
};

/// Pools detections of all images, orders them by confidence (ties by image,
/// then per-image order) and builds cumulative precision/recall.
PRCurve build_pr_curve(std::span<const MatchOutcome> outcomes);

/// Area under the monotone precision envelope over recall.
double interpolated_area(const PRCurve& curve);

/// AP over a dataset of per-image outcomes. Throws UndefinedApError when the
/// dataset contains no ground truth.
double average_precision(std::span<const MatchOutcome> outcomes);

struct EvalSample {
  std::string image_id;
  std::vector<GroundTruth> gts;
  std::vector<Detection> dets;
};

/// AP of one class across a dataset.
double class_average_precision(std::span<const EvalSample> samples, int class_id,
                               double iou_threshold = kDefaultIouThreshold);

/// Mean of per-class APs over classes with at least one GT.
double map_at_05(std::span<const EvalSample> samples);

struct TestAggregate {
  double average = 0.0;
  double difference = 0.0;
};

TestAggregate aggregate(double test_normal_ap, double test_difficult_ap);

struct EvalReport {
  std::string model_id;
  std::optional<double> validation;
  std::optional<double> test_normal;
  std::optional<double> test_difficult;

  bool has_tests() const { return test_normal && test_difficult; }
  /// Derived from the two test APs; throws Error if either is missing.
  TestAggregate tests() const;
};

/// Highest test average; averages within 1e-6 are tied and broken by the
/// smaller difference, then by input order. Throws Error for an empty list.
std::size_t select_model_index(std::span<const EvalReport> reports);
std::string select_model(std::span<const EvalReport> reports);

/// Pairs `<gt_dir>/<name>.txt` with `<det_dir>/<name>.det.txt`. An image with
/// no detection file has no detections.
std::vector<EvalSample> load_eval_dataset(const std::string& gt_dir, const std::string& det_dir);

std::string eval_report_to_json(const EvalReport& report);
EvalReport eval_report_from_json(std::string_view text);
/// Header plus one row per report, three decimals, mirroring the results tables.
std::string eval_reports_to_csv(std::span<const EvalReport> reports);

}  // namespace detbench
