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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "detbench/annotation.hpp"
#include "detbench/augment.hpp"
#include "detbench/error.hpp"
#include "detbench/evaluator.hpp"
#include "detbench/pipeline.hpp"
#include "detbench/strategy.hpp"

namespace py = pybind11;
using namespace detbench;

namespace {

using Pixels = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Image to_image(const Pixels& arr) {
  if (arr.ndim() != 3 || arr.shape(2) != 3) {
    throw py::value_error("expected a uint8 array of shape (height, width, 3)");
  }
  const auto h = static_cast<int>(arr.shape(0));
  const auto w = static_cast<int>(arr.shape(1));
  std::vector<std::uint8_t> px(arr.data(), arr.data() + arr.size());
  return Image(w, h, std::move(px));
}

Pixels to_array(const Image& img) {
  Pixels out({img.height(), img.width(), 3});
  std::memcpy(out.mutable_data(), img.data().data(), img.data().size());
  return out;
}

using BoxTuple = std::tuple<double, double, double, double>;

BoundingBox to_box(const BoxTuple& t) {
  return {std::get<0>(t), std::get<1>(t), std::get<2>(t), std::get<3>(t)};
}
BoxTuple from_box(const BoundingBox& b) { return {b.cx, b.cy, b.w, b.h}; }

std::vector<GroundTruth> to_gts(const std::vector<std::tuple<int, BoxTuple>>& in) {
  std::vector<GroundTruth> out;
  for (const auto& [cls, box] : in) out.push_back({cls, to_box(box)});
  return out;
}

std::vector<Detection> to_dets(const std::vector<std::tuple<int, BoxTuple, double>>& in) {
  std::vector<Detection> out;
  for (const auto& [cls, box, conf] : in) out.push_back({cls, to_box(box), conf});
  return out;
}

py::dict latency_dict(const LatencyReport& r) {
  py::dict d;
  d["backend"] = r.backend;
  d["frames"] = r.frames;
  d["warmup"] = r.warmup;
  d["preprocess_ms"] = r.preprocess.mean;
  d["inference_ms"] = r.inference.mean;
  d["postprocess_ms"] = r.postprocess.mean;
  d["total_ms"] = r.mean_total_ms();
  d["possible_fps"] = r.possible_fps();
  return d;
}

}  // namespace

PYBIND11_MODULE(_detbench, m) {
  m.doc() = "detbench: dataset compositing, augmentation, evaluation and latency tools";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<UndefinedApError>(m, "UndefinedApError", PyExc_ArithmeticError);

  m.def("iou",
        [](const std::tuple<double, double, double, double>& a,
           const std::tuple<double, double, double, double>& b) {
          return iou(PixelBox{std::get<0>(a), std::get<1>(a), std::get<2>(a), std::get<3>(a)},
                     PixelBox{std::get<0>(b), std::get<1>(b), std::get<2>(b), std::get<3>(b)});
        },
        py::arg("a"), py::arg("b"), "IoU of two (x0, y0, x1, y1) pixel rectangles.");
  m.def("box_iou", [](const BoxTuple& a, const BoxTuple& b) { return box_iou(to_box(a), to_box(b)); },
        py::arg("a"), py::arg("b"), "IoU of two normalized (cx, cy, w, h) boxes.");

  m.def("parse_label_file",
        [](const std::string& text) {
          std::vector<std::tuple<int, BoxTuple>> out;
          for (const auto& g : parse_label_file(text)) out.emplace_back(g.class_id, from_box(g.box));
          return out;
        },
        py::arg("text"));
  m.def("write_label_file",
        [](const std::vector<std::tuple<int, BoxTuple>>& gts) { return write_label_file(to_gts(gts)); },
        py::arg("objects"));
  m.def("parse_detection_file",
        [](const std::string& text) {
          std::vector<std::tuple<int, BoxTuple, double>> out;
          for (const auto& d : parse_detection_file(text)) {
            out.emplace_back(d.class_id, from_box(d.box), d.confidence);
          }
          return out;
        },
        py::arg("text"));

  m.def("map_at_05",
        [](const std::vector<std::tuple<std::vector<std::tuple<int, BoxTuple>>,
                                        std::vector<std::tuple<int, BoxTuple, double>>>>& images) {
          std::vector<EvalSample> samples;
          for (std::size_t i = 0; i < images.size(); ++i) {
            samples.push_back({std::to_string(i), to_gts(std::get<0>(images[i])),
                               to_dets(std::get<1>(images[i]))});
          }
          return map_at_05(samples);
        },
        py::arg("images"),
        "mAP@0.5 over a list of (ground_truths, detections) pairs, one per image.");
  m.def("aggregate",
        [](double n, double d) {
          const auto a = aggregate(n, d);
          return std::make_tuple(a.average, a.difference);
        },
        py::arg("test_normal"), py::arg("test_difficult"));
  m.def("select_model",
        [](const std::vector<std::tuple<std::string, double, double>>& rows) {
          std::vector<EvalReport> reports;
          for (const auto& [id, n, d] : rows) reports.push_back({id, std::nullopt, n, d});
          return select_model(reports);
        },
        py::arg("reports"), "Pick from (model_id, test_normal_ap, test_difficult_ap) rows.");

  m.def("split",
        [](const std::vector<std::tuple<std::string, std::string>>& entries, std::uint64_t seed) {
          Inventory inv;
          for (const auto& [path, origin] : entries) {
            const auto o = parse_origin(origin);
            if (!o) throw py::value_error("unknown origin tag: " + origin);
            ImageEntry e;
            e.path = path;
            e.origin = *o;
            inv.entries.push_back(std::move(e));
          }
          SplitSpec spec;
          spec.seed = seed;
          const auto s = split(inv, spec);
          py::dict d;
          d["real_train"] = s.real_train;
          d["real_val"] = s.real_val;
          d["real_test"] = s.real_test;
          d["real_difficult"] = s.real_difficult;
          d["gen_train"] = s.gen_train();
          d["gen_val"] = s.gen_val();
          py::dict manifests;
          for (auto id : kAllStrategies) {
            try {
              const auto mf = build_manifest(id, s);
              manifests[py::str(std::string(strategy_name(id)))] =
                  py::make_tuple(mf.train, mf.val);
            } catch (const Error&) {
            }
          }
          d["manifests"] = manifests;
          return d;
        },
        py::arg("entries"), py::arg("seed") = 0,
        "Split (path, origin) entries; returns the sets and every buildable manifest.");

  m.def("autocontrast", [](const Pixels& a, double cutoff) { return to_array(autocontrast(to_image(a), cutoff)); },
        py::arg("image"), py::arg("cutoff") = 0.0);
  m.def("illumination",
        [](const Pixels& a, double angle, double strength) {
          return to_array(illumination(to_image(a), angle, strength));
        },
        py::arg("image"), py::arg("angle_deg"), py::arg("strength"));
  m.def("motion_blur",
        [](const Pixels& a, int length, double angle) { return to_array(motion_blur(to_image(a), length, angle)); },
        py::arg("image"), py::arg("length"), py::arg("angle_deg") = 0.0);
  m.def("defocus", [](const Pixels& a, double r) { return to_array(defocus(to_image(a), r)); },
        py::arg("image"), py::arg("radius"));
  m.def("chromatic_aberration",
        [](const Pixels& a, double shift) { return to_array(chromatic_aberration(to_image(a), shift)); },
        py::arg("image"), py::arg("shift"));
  m.def("iso_noise",
        [](const Pixels& a, double color, double intensity, std::uint64_t seed) {
          return to_array(iso_noise(to_image(a), color, intensity, seed));
        },
        py::arg("image"), py::arg("color_shift"), py::arg("intensity"), py::arg("seed") = 0);
  m.def("augment",
        [](const Pixels& a, std::uint64_t seed, std::optional<std::string> config) {
          const auto spec = config ? parse_augmentation_spec(*config) : default_augmentation_spec();
          const auto r = apply_spec(to_image(a), spec, seed);
          std::vector<std::pair<std::string, std::map<std::string, double>>> applied;
          for (const auto& k : r.applied) applied.emplace_back(std::string(kernel_name(k.id)), k.params);
          return py::make_tuple(to_array(r.image), applied);
        },
        py::arg("image"), py::arg("seed") = 0, py::arg("config") = py::none(),
        "Apply an augmentation spec (JSON text, default spec if omitted).");

  m.def("bench_stub",
        [](double pre, double inf, double post, std::size_t iterations, std::size_t warmup) {
          auto stub = StubBackend::with_fixed_timings({pre, inf, post});
          const std::vector<Image> images{Image(32, 32, 0)};
          return latency_dict(bench(stub, images, warmup, iterations));
        },
        py::arg("preprocess_ms"), py::arg("inference_ms"), py::arg("postprocess_ms"),
        py::arg("iterations") = 10, py::arg("warmup") = 0);
  m.def("round_half_even", &round_half_even, py::arg("value"), py::arg("decimals"));
}
