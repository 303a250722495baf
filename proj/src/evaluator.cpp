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

#include "detbench/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>

#include "json.hpp"

#include "detbench/error.hpp"
#include "detbench/logging.hpp"

namespace detbench {
namespace fs = std::filesystem;
using nlohmann::json;

double box_iou(const BoundingBox& a, const BoundingBox& b) {
  auto corners = [](const BoundingBox& x) {
    return PixelBox{x.cx - x.w / 2.0, x.cy - x.h / 2.0, x.cx + x.w / 2.0, x.cy + x.h / 2.0};
  };
  return iou(corners(a), corners(b));
}

MatchOutcome match(std::span<const GroundTruth> gts, std::span<const Detection> dets,
                   double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });
  std::vector<bool> taken(gts.size(), false);
  MatchOutcome out;
  out.total_gts = gts.size();
  for (std::size_t di : order) {
    const Detection& d = dets[di];
    MatchedDetection m{di, d.confidence, false, std::nullopt, 0.0};
    double best = -1.0;
    std::size_t best_gt = 0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].class_id != d.class_id) continue;
      const double v = box_iou(d.box, gts[g].box);
      if (v > best) {
        best = v;
        best_gt = g;
      }
    }
    if (best >= iou_threshold) {
      taken[best_gt] = true;
      m.true_positive = true;
      m.gt_index = best_gt;
      m.iou = best;
    } else if (best > 0.0) {
      m.iou = best;
    }
    out.detections.push_back(m);
  }
  out.unmatched_gts =
      static_cast<std::size_t>(std::count(taken.begin(), taken.end(), false));
  return out;
}

PRCurve build_pr_curve(std::span<const MatchOutcome> outcomes) {
  struct Pooled {
    double confidence;
    bool tp;
  };
  std::vector<Pooled> pooled;
  std::size_t total_gts = 0;
  for (const auto& o : outcomes) {
    total_gts += o.total_gts;
    for (const auto& d : o.detections) pooled.push_back({d.confidence, d.true_positive});
  }
  std::stable_sort(pooled.begin(), pooled.end(),
                   [](const Pooled& a, const Pooled& b) { return a.confidence > b.confidence; });
  PRCurve curve;
  curve.precision.reserve(pooled.size());
  curve.recall.reserve(pooled.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    tp += pooled[i].tp ? 1 : 0;
    curve.precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    curve.recall.push_back(total_gts ? static_cast<double>(tp) / static_cast<double>(total_gts)
                                     : 0.0);
  }
  return curve;
}

double interpolated_area(const PRCurve& curve) {
  std::vector<double> envelope = curve.precision;
  for (std::size_t i = envelope.size(); i-- > 1;) {
    envelope[i - 1] = std::max(envelope[i - 1], envelope[i]);
  }
  double area = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < envelope.size(); ++i) {
    area += (curve.recall[i] - prev_recall) * envelope[i];
    prev_recall = curve.recall[i];
  }
  return std::clamp(area, 0.0, 1.0);
}

double average_precision(std::span<const MatchOutcome> outcomes) {
  std::size_t total = 0;
  for (const auto& o : outcomes) total += o.total_gts;
  if (total == 0) throw UndefinedApError("AP is undefined: dataset has no ground-truth objects");
  return interpolated_area(build_pr_curve(outcomes));
}

double class_average_precision(std::span<const EvalSample> samples, int class_id,
                               double iou_threshold) {
  std::vector<MatchOutcome> outcomes;
  outcomes.reserve(samples.size());
  for (const auto& s : samples) {
    std::vector<GroundTruth> gts;
    std::vector<Detection> dets;
    std::copy_if(s.gts.begin(), s.gts.end(), std::back_inserter(gts),
                 [&](const GroundTruth& g) { return g.class_id == class_id; });
    std::copy_if(s.dets.begin(), s.dets.end(), std::back_inserter(dets),
                 [&](const Detection& d) { return d.class_id == class_id; });
    outcomes.push_back(match(gts, dets, iou_threshold));
  }
  return average_precision(outcomes);
}

double map_at_05(std::span<const EvalSample> samples) {
  std::set<int> classes;
  for (const auto& s : samples) {
    for (const auto& g : s.gts) classes.insert(g.class_id);
  }
  if (classes.empty()) {
    throw UndefinedApError("mAP is undefined: dataset has no ground-truth objects");
  }
  double sum = 0.0;
  for (int c : classes) sum += class_average_precision(samples, c);
  return sum / static_cast<double>(classes.size());
}

TestAggregate aggregate(double test_normal_ap, double test_difficult_ap) {
  return {(test_normal_ap + test_difficult_ap) / 2.0, std::abs(test_normal_ap - test_difficult_ap)};
}

TestAggregate EvalReport::tests() const {
  if (!has_tests()) throw Error("report " + model_id + " lacks a test-normal or test-difficult AP");
  return aggregate(*test_normal, *test_difficult);
}

std::size_t select_model_index(std::span<const EvalReport> reports) {
  if (reports.empty()) throw Error("select_model: no reports");
  constexpr double kTie = 1e-6;
  std::size_t best = 0;
  TestAggregate best_agg = reports[0].tests();
  for (std::size_t i = 1; i < reports.size(); ++i) {
    const TestAggregate agg = reports[i].tests();
    if (agg.average > best_agg.average + kTie ||
        (std::abs(agg.average - best_agg.average) <= kTie &&
         agg.difference < best_agg.difference - kTie)) {
      best = i;
      best_agg = agg;
    }
  }
  return best;
}

std::string select_model(std::span<const EvalReport> reports) {
  return reports[select_model_index(reports)].model_id;
}

std::vector<EvalSample> load_eval_dataset(const std::string& gt_dir, const std::string& det_dir) {
  if (!fs::is_directory(gt_dir)) throw IoError("ground-truth directory not found: " + gt_dir);
  if (!fs::is_directory(det_dir)) throw IoError("detection directory not found: " + det_dir);
  std::set<std::string> gt_names;
  std::set<std::string> det_names;
  const std::string det_suffix = ".det.txt";
  for (const auto& e : fs::directory_iterator(gt_dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.ends_with(".txt") && !name.ends_with(det_suffix)) {
      gt_names.insert(name.substr(0, name.size() - 4));
    }
  }
  for (const auto& e : fs::directory_iterator(det_dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.ends_with(det_suffix)) {
      det_names.insert(name.substr(0, name.size() - det_suffix.size()));
    }
  }
  std::set<std::string> all = gt_names;
  all.insert(det_names.begin(), det_names.end());
  std::vector<EvalSample> samples;
  for (const auto& name : all) {
    EvalSample s;
    s.image_id = name;
    if (gt_names.count(name)) {
      s.gts = read_label_file((fs::path(gt_dir) / (name + ".txt")).string());
    } else {
      log_warning("detections for " + name + " have no ground-truth file; counted as background");
    }
    if (det_names.count(name)) {
      s.dets = read_detection_file((fs::path(det_dir) / (name + det_suffix)).string());
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& doc, const char* key) {
  if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
  return doc.at(key).get<double>();
}

std::string fixed3(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", *v);
  return buf;
}

}  // namespace

std::string eval_report_to_json(const EvalReport& report) {
  json doc = {{"model", report.model_id},
              {"validation", optional_json(report.validation)},
              {"test_normal", optional_json(report.test_normal)},
              {"test_difficult", optional_json(report.test_difficult)}};
  if (report.has_tests()) {
    const auto agg = report.tests();
    doc["test_average"] = agg.average;
    doc["test_difference"] = agg.difference;
  }
  return doc.dump(2) + "\n";
}

EvalReport eval_report_from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    EvalReport r;
    r.model_id = doc.value("model", "");
    r.validation = optional_from(doc, "validation");
    r.test_normal = optional_from(doc, "test_normal");
    r.test_difficult = optional_from(doc, "test_difficult");
    // test_average / test_difference are derived and intentionally not read back.
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("eval report: ") + e.what());
  }
}

std::string eval_reports_to_csv(std::span<const EvalReport> reports) {
  std::string out =
      "Model,mAP@0.5 Validation,mAP@0.5 Test-N,mAP@0.5 Test-D,mAP@0.5 Test Avg,mAP@0.5 Test Diff\n";
  for (const auto& r : reports) {
    std::optional<double> avg;
    std::optional<double> diff;
    if (r.has_tests()) {
      avg = r.tests().average;
      diff = r.tests().difference;
    }
    out += r.model_id + "," + fixed3(r.validation) + "," + fixed3(r.test_normal) + "," +
           fixed3(r.test_difficult) + "," + fixed3(avg) + "," + fixed3(diff) + "\n";
  }
  return out;
}

}  // namespace detbench
