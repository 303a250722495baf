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

#include "detbench/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "detbench/augment.hpp"
#include "detbench/compositor.hpp"
#include "detbench/error.hpp"
#include "detbench/evaluator.hpp"
#include "detbench/logging.hpp"
#include "detbench/pipeline.hpp"
#include "detbench/rng.hpp"
#include "detbench/strategy.hpp"

namespace detbench {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalConfig {
  std::uint64_t seed = kDefaultSeed;
  bool seed_given = false;
  int jobs = 1;
  std::string out_dir = "out";
  bool json_output = false;
  int verbosity = 0;
  bool quiet = false;

  std::uint64_t resolved_seed() const {
    if (seed_given) return seed;
    if (const char* env = std::getenv("DETBENCH_SEED"); env != nullptr && *env != '\0') {
      try {
        std::size_t used = 0;
        const auto v = std::stoull(env, &used, 0);
        if (used == std::string(env).size()) return v;
      } catch (const std::exception&) {
      }
      throw CLI::ValidationError("DETBENCH_SEED", "not an unsigned 64-bit integer");
    }
    return kDefaultSeed;
  }
  fs::path out(const std::string& name) const { return fs::path(out_dir) / name; }
};

struct ComposeArgs {
  std::string backgrounds;
  std::string assets;
  std::size_t count = 0;
  CompositeParams params;
};

struct AugmentArgs {
  std::string input;
  std::string config;
  std::optional<std::uint64_t> seed;
};

struct SplitArgs {
  std::string inventory;
};

struct ManifestArgs {
  std::string splits;
  std::string strategy;
};

struct VerifyArgs {
  std::string manifest;
  std::string root = ".";
};

struct EvalArgs {
  std::string gt;
  std::string det;
  std::string dataset = "test-normal";
  std::string difficult_gt;
  std::string difficult_det;
  std::string val_gt;
  std::string val_det;
  std::string model = "model";
  bool csv = false;
};

struct SelectArgs {
  std::vector<std::string> reports;
};

struct RunArgs {
  std::string source;
  std::size_t synthetic = 0;
  std::string backend = "stub";
  std::vector<double> stub_timings{0.0, 0.0, 0.0};
  std::size_t capacity = 1;
  int timeout_ms = 30000;
  bool sync = false;
};

struct BenchArgs {
  std::string backend = "stub";
  std::string source;
  std::vector<double> stub_timings{0.0, 0.0, 0.0};
  std::size_t warmup = 0;
  std::size_t iterations = 10;
  int timeout_ms = 30000;
  int input_size = 320;
};

std::unique_ptr<DetectorBackend> make_backend(const std::string& spec,
                                              const std::vector<double>& stub_timings,
                                              int timeout_ms) {
  if (spec == "stub") {
    if (stub_timings.size() != 3) {
      throw CLI::ValidationError("--stub-timings", "expects three values: pre,inf,post");
    }
    return std::make_unique<StubBackend>(StubBackend::with_fixed_timings(
        StageTimings{stub_timings[0], stub_timings[1], stub_timings[2]}));
  }
  const std::string prefix = "external:";
  if (spec.rfind(prefix, 0) == 0 && spec.size() > prefix.size()) {
    return std::make_unique<ExternalBackend>(spec.substr(prefix.size()),
                                             std::chrono::milliseconds(timeout_ms));
  }
  throw CLI::ValidationError("--backend", "expected 'stub' or 'external:<command>'");
}

int cmd_compose(const GlobalConfig& g, const ComposeArgs& a, std::ostream& out) {
  const auto backgrounds = load_backgrounds(a.backgrounds);
  const auto assets = load_assets(a.assets);
  a.params.validate();
  const std::uint64_t seed = g.resolved_seed();
  Inventory inventory;
  json recipes = json::array();
  std::size_t dual = 0;
  generate_dataset(
      backgrounds, assets, a.count, a.params, seed,
      [&](const PlannedImage& item, CompositeResult&& r, const ImageEntry& entry) {
        const std::string rel = "images/" + entry.path;
        save_png(g.out(rel).string(), r.image);
        write_text_file(g.out(label_path_for(rel)).string(), write_label_file(r.objects));
        ImageEntry e = entry;
        e.path = rel;
        inventory.entries.push_back(std::move(e));
        json placements = json::array();
        for (const auto& p : r.recipe.placements) {
          placements.push_back({{"asset", p.asset_id},
                                {"rect", {p.rect.x0, p.rect.y0, p.rect.x1, p.rect.y1}},
                                {"blur_sigma", p.blur_sigma},
                                {"gain", p.gain}});
        }
        dual += r.recipe.placements.size() == 2 ? 1 : 0;
        recipes.push_back({{"image", rel},
                           {"seed", r.recipe.seed},
                           {"background", r.recipe.background_id},
                           {"origin", std::string(origin_name(item.origin))},
                           {"placements", placements}});
      },
      g.jobs);
  write_text_file(g.out("inventory.json").string(), inventory_to_json(inventory));
  write_text_file(g.out("recipes.json").string(),
                  json{{"master_seed", seed}, {"recipes", recipes}}.dump(2) + "\n");
  if (g.json_output) {
    out << json{{"images", inventory.entries.size()}, {"dual_inserts", dual}, {"seed", seed},
                {"out", g.out_dir}}
               .dump()
        << "\n";
  } else {
    out << "composed " << inventory.entries.size() << " images (" << dual
        << " with two sensors) into " << g.out_dir << "\n";
  }
  return kExitOk;
}

int cmd_augment(const GlobalConfig& g, const AugmentArgs& a, std::ostream& out) {
  const AugmentationSpec spec = a.config.empty()
                                    ? default_augmentation_spec()
                                    : parse_augmentation_spec(read_text_file(a.config));
  const std::uint64_t seed = a.seed ? *a.seed : g.resolved_seed();
  std::vector<fs::path> inputs;
  if (fs::is_regular_file(a.input)) {
    inputs.push_back(a.input);
  } else if (fs::is_directory(a.input)) {
    for (const auto& e : fs::directory_iterator(a.input)) {
      if (e.is_regular_file() && e.path().extension() == ".png") inputs.push_back(e.path());
    }
    std::sort(inputs.begin(), inputs.end());
  } else {
    throw IoError("augment input not found: " + a.input);
  }
  json log = json::array();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& path = inputs[i];
    const auto result = apply_spec(load_png(path.string()).rgb, spec, derive_seed(seed, i));
    const std::string name = path.filename().string();
    save_png(g.out(name).string(), result.image);
    const fs::path label = fs::path(path).replace_extension(".txt");
    if (fs::exists(label)) {
      write_text_file(g.out(label.filename().string()).string(), read_text_file(label.string()));
    }
    json applied = json::array();
    for (const auto& k : result.applied) {
      applied.push_back({{"kernel", std::string(kernel_name(k.id))}, {"params", json(k.params)}});
    }
    log.push_back({{"image", name}, {"applied", applied}});
  }
  write_text_file(g.out("augment_log.json").string(),
                  json{{"seed", seed}, {"images", log}}.dump(2) + "\n");
  if (g.json_output) {
    out << json{{"images", inputs.size()}, {"seed", seed}}.dump() << "\n";
  } else {
    out << "augmented " << inputs.size() << " images into " << g.out_dir << "\n";
  }
  return kExitOk;
}

int cmd_split(const GlobalConfig& g, const SplitArgs& a, std::ostream& out) {
  const Inventory inventory = load_inventory(a.inventory);
  SplitSpec spec;
  spec.seed = g.resolved_seed();
  const SplitSets sets = split(inventory, spec);
  write_text_file(g.out("splits.json").string(), splits_to_json(sets));
  json written = json::array();
  for (StrategyId s : kAllStrategies) {
    try {
      const auto m = build_manifest(s, sets);
      const std::string name = "manifest_" + std::string(strategy_name(s)) + ".json";
      write_text_file(g.out(name).string(), manifest_to_json(m));
      written.push_back(name);
    } catch (const Error& e) {
      log_warning(e.what());
    }
  }
  const json summary = {{"real_train", sets.real_train.size()},
                        {"real_val", sets.real_val.size()},
                        {"real_test", sets.real_test.size()},
                        {"real_difficult", sets.real_difficult.size()},
                        {"gen_real_train", sets.gen_real_train.size()},
                        {"gen_real_val", sets.gen_real_val.size()},
                        {"gen_render_train", sets.gen_render_train.size()},
                        {"gen_render_val", sets.gen_render_val.size()},
                        {"seed", spec.seed},
                        {"manifests", written}};
  if (g.json_output) {
    out << summary.dump() << "\n";
  } else {
    out << "real-normal  train/val/test: " << sets.real_train.size() << " / "
        << sets.real_val.size() << " / " << sets.real_test.size() << "\n"
        << "real-difficult test:         " << sets.real_difficult.size() << "\n"
        << "gen-real     train/val:      " << sets.gen_real_train.size() << " / "
        << sets.gen_real_val.size() << "\n"
        << "gen-render   train/val:      " << sets.gen_render_train.size() << " / "
        << sets.gen_render_val.size() << "\n";
  }
  return kExitOk;
}

int cmd_manifest(const GlobalConfig& g, const ManifestArgs& a, std::ostream& out) {
  const auto strategy = parse_strategy(a.strategy);
  if (!strategy) throw CLI::ValidationError("--strategy", "expected rr, rg, gg, gr or mr");
  const SplitSets sets = splits_from_json(read_text_file(a.splits));
  const auto m = build_manifest(*strategy, sets);
  const std::string name = "manifest_" + std::string(strategy_name(*strategy)) + ".json";
  write_text_file(g.out(name).string(), manifest_to_json(m));
  if (g.json_output) {
    out << json{{"strategy", std::string(strategy_name(*strategy))},
                {"train", m.train.size()},
                {"val", m.val.size()},
                {"test_normal", m.test_normal.size()},
                {"test_difficult", m.test_difficult.size()},
                {"file", name}}
               .dump()
        << "\n";
  } else {
    out << strategy_name(*strategy) << ": train " << m.train.size() << ", val " << m.val.size()
        << ", test-normal " << m.test_normal.size() << ", test-difficult "
        << m.test_difficult.size() << "\n";
  }
  return kExitOk;
}

int cmd_verify(const GlobalConfig& g, const VerifyArgs& a, std::ostream& out) {
  const auto m = manifest_from_json(read_text_file(a.manifest));
  const auto report = verify_manifest(m, a.root);
  write_text_file(g.out("verify_report.json").string(), verify_report_to_json(report));
  if (g.json_output) {
    out << json::parse(verify_report_to_json(report)).dump() << "\n";
  } else {
    out << (report.pass() ? "PASS" : "FAIL") << " (" << report.violations.size()
        << " violations)\n";
    for (const auto& v : report.violations) {
      out << "  " << v.kind << ": " << v.path << " - " << v.detail << "\n";
    }
  }
  return report.pass() ? kExitOk : kExitDomainError;
}

int cmd_eval(const GlobalConfig& g, const EvalArgs& a, std::ostream& out) {
  EvalReport report;
  report.model_id = a.model;
  auto ap = [](const std::string& gt, const std::string& det) {
    return map_at_05(load_eval_dataset(gt, det));
  };
  const double primary = ap(a.gt, a.det);
  if (a.dataset == "test-normal") {
    report.test_normal = primary;
  } else if (a.dataset == "test-difficult") {
    report.test_difficult = primary;
  } else {
    report.validation = primary;
  }
  if (!a.difficult_gt.empty()) report.test_difficult = ap(a.difficult_gt, a.difficult_det);
  if (!a.val_gt.empty()) report.validation = ap(a.val_gt, a.val_det);

  write_text_file(g.out("eval_report.json").string(), eval_report_to_json(report));
  if (a.csv) {
    write_text_file(g.out("eval_report.csv").string(),
                    eval_reports_to_csv(std::span<const EvalReport>(&report, 1)));
  }
  if (g.json_output) {
    out << json::parse(eval_report_to_json(report)).dump() << "\n";
  } else {
    auto line = [&](const char* name, const std::optional<double>& v) {
      if (v) out << "AP@0.5 " << name << ": " << std::fixed << std::setprecision(6) << *v << "\n";
    };
    line("validation", report.validation);
    line("test-normal", report.test_normal);
    line("test-difficult", report.test_difficult);
    if (report.has_tests()) {
      const auto agg = report.tests();
      out << "test average: " << agg.average << "\ntest difference: " << agg.difference << "\n";
    }
  }
  return kExitOk;
}

int cmd_select(const GlobalConfig& g, const SelectArgs& a, std::ostream& out) {
  std::vector<EvalReport> reports;
  for (const auto& path : a.reports) reports.push_back(eval_report_from_json(read_text_file(path)));
  const std::size_t best = select_model_index(reports);
  const auto agg = reports[best].tests();
  const json doc = {{"selected", reports[best].model_id},
                    {"test_average", agg.average},
                    {"test_difference", agg.difference},
                    {"candidates", reports.size()}};
  write_text_file(g.out("selection.json").string(), doc.dump(2) + "\n");
  write_text_file(g.out("selection.csv").string(), eval_reports_to_csv(reports));
  if (g.json_output) {
    out << doc.dump() << "\n";
  } else {
    out << reports[best].model_id << "\n";
  }
  return kExitOk;
}

int cmd_run(const GlobalConfig& g, const RunArgs& a, std::ostream& out) {
  auto backend = make_backend(a.backend, a.stub_timings, a.timeout_ms);
  std::unique_ptr<FrameSource> source;
  if (!a.source.empty()) {
    source = std::make_unique<DirectorySource>(a.source);
  } else if (a.synthetic > 0) {
    source = std::make_unique<SyntheticSource>(a.synthetic, backend->input_size(),
                                               backend->input_size());
  } else {
    throw CLI::ValidationError("run", "either --source or --synthetic is required");
  }
  PipelineOptions options;
  options.queue_capacity = a.capacity;
  options.threaded = !a.sync;
  const auto det_dir = g.out("detections");
  const auto summary = run_pipeline(*source, *backend,
                                    [&](const Frame& f, const DetectionMessage& m) {
                                      char name[40];
                                      std::snprintf(name, sizeof(name), "frame_%06llu.det.txt",
                                                    static_cast<unsigned long long>(f.sequence_id));
                                      write_text_file((det_dir / name).string(),
                                                      write_detection_file(m.detections));
                                    },
                                    options);
  write_text_file(g.out("run_summary.json").string(), run_summary_to_json(summary));
  if (g.json_output) {
    out << json::parse(run_summary_to_json(summary)).dump() << "\n";
  } else {
    out << "frames in " << summary.frames_in << ", processed " << summary.processed
        << ", dropped " << summary.dropped << ", failed " << summary.failed << ", delivered "
        << summary.delivered << "\n";
  }
  return kExitOk;
}

int cmd_bench(const GlobalConfig& g, const BenchArgs& a, std::ostream& out) {
  auto backend = make_backend(a.backend, a.stub_timings, a.timeout_ms);
  std::vector<Image> images;
  if (!a.source.empty()) {
    DirectorySource src(a.source);
    while (auto f = src.next()) images.push_back(*f->image);
    if (images.empty()) throw IoError("no PNG images in " + a.source);
  } else {
    SyntheticSource src(1, a.input_size, a.input_size);
    images.push_back(*src.next()->image);
  }
  const auto report = bench(*backend, images, a.warmup, a.iterations);
  const fs::path target = g.out_dir.ends_with(".json") ? fs::path(g.out_dir)
                                                        : g.out("bench_report.json");
  write_text_file(target.string(), latency_report_to_json(report));
  if (g.json_output) {
    out << json::parse(latency_report_to_json(report)).dump() << "\n";
  } else {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "preprocess %.1f ms | inference %.1f ms | postprocess %.1f ms | total %.1f ms "
                  "| possible FPS %.3f\n",
                  report.preprocess.mean, report.inference.mean, report.postprocess.mean,
                  report.mean_total_ms(), round_half_even(report.possible_fps(), 3));
    out << buf;
  }
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"detbench: semi-synthetic detection datasets, evaluation and latency harness",
               "detbench"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalConfig g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Master seed (default 42, or $DETBENCH_SEED)");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::Range(1, 1024));
  app.add_option("--out", g.out_dir, "Output directory");
  app.add_flag("--json", g.json_output, "Machine-readable JSON summary on stdout");
  app.add_flag("-v,--verbose", g.verbosity, "More logging (repeatable)");
  app.add_flag("-q,--quiet", g.quiet, "Suppress warnings");

  ComposeArgs compose;
  auto* c = app.add_subcommand("compose", "Generate semi-synthetic images");
  c->add_option("--backgrounds", compose.backgrounds, "Directory of background PNGs")->required();
  c->add_option("--assets", compose.assets, "Directory with real-cutout/ and render/")->required();
  c->add_option("-n,--count", compose.count, "Number of images")->required()->check(
      CLI::PositiveNumber);
  c->add_option("--top-band", compose.params.top_band_fraction, "Top band height fraction");
  c->add_option("--dual-prob", compose.params.dual_insert_prob, "Two-sensor probability");
  c->add_option("--scale-min", compose.params.scale_range.first, "Min width fraction");
  c->add_option("--scale-max", compose.params.scale_range.second, "Max width fraction");
  c->add_option("--blur-min", compose.params.blur_sigma_range.first, "Min feather sigma (px)");
  c->add_option("--blur-max", compose.params.blur_sigma_range.second, "Max feather sigma (px)");
  c->add_option("--brightness-blend", compose.params.brightness_blend, "Brightness adaptation");

  AugmentArgs augment;
  std::uint64_t aug_seed = 0;
  auto* au = app.add_subcommand("augment", "Apply the distortion augmentation spec");
  au->add_option("--input", augment.input, "PNG file or directory")->required();
  au->add_option("--aug-config", augment.config, "Augmentation JSON config");
  auto* aug_seed_opt = au->add_option("--aug-seed", aug_seed, "Augmentation seed");

  SplitArgs split_args;
  auto* sp = app.add_subcommand("split", "Split an inventory and write all manifests");
  sp->add_option("--inventory", split_args.inventory, "Inventory directory")->required();

  ManifestArgs manifest;
  auto* ma = app.add_subcommand("manifest", "Build one strategy manifest from splits.json");
  ma->add_option("--strategy", manifest.strategy, "rr, rg, gg, gr or mr")->required();
  ma->add_option("--splits", manifest.splits, "splits.json written by split")->required();

  VerifyArgs verify;
  auto* ve = app.add_subcommand("verify", "Check a manifest for leaks and missing files");
  ve->add_option("--manifest", verify.manifest, "Manifest JSON")->required();
  ve->add_option("--root", verify.root, "Directory the manifest paths are relative to");

  EvalArgs eval;
  auto* ev = app.add_subcommand("eval", "Compute mAP@0.5");
  ev->add_option("--gt", eval.gt, "Directory of <img>.txt ground truth")->required();
  ev->add_option("--det", eval.det, "Directory of <img>.det.txt detections")->required();
  ev->add_option("--dataset", eval.dataset, "Which dataset --gt holds")
      ->check(CLI::IsMember({"test-normal", "test-difficult", "validation"}));
  auto* dg = ev->add_option("--difficult-gt", eval.difficult_gt, "Test-difficult ground truth");
  auto* dd = ev->add_option("--difficult-det", eval.difficult_det, "Test-difficult detections");
  auto* vg = ev->add_option("--val-gt", eval.val_gt, "Validation ground truth");
  auto* vd = ev->add_option("--val-det", eval.val_det, "Validation detections");
  dg->needs(dd);
  dd->needs(dg);
  vg->needs(vd);
  vd->needs(vg);
  ev->add_option("--model", eval.model, "Model id recorded in the report");
  ev->add_flag("--csv", eval.csv, "Also write a CSV table");

  SelectArgs select;
  auto* se = app.add_subcommand("select", "Pick the model with the best test average");
  se->add_option("--reports", select.reports, "Eval report JSON files")->required();

  RunArgs run;
  auto* ru = app.add_subcommand("run", "Stream frames through the three-stage pipeline");
  ru->add_option("--source", run.source, "Directory of PNG frames");
  ru->add_option("--synthetic", run.synthetic, "Number of synthetic frames");
  ru->add_option("--backend", run.backend, "stub or external:<command>");
  ru->add_option("--stub-timings", run.stub_timings, "pre,inf,post ms for the stub")
      ->delimiter(',')
      ->expected(3);
  ru->add_option("--capacity", run.capacity, "Inter-stage queue capacity")
      ->check(CLI::PositiveNumber);
  ru->add_option("--timeout-ms", run.timeout_ms, "External backend timeout");
  ru->add_flag("--sync", run.sync, "Synchronous driver (no drops)");

  BenchArgs bench_args;
  auto* be = app.add_subcommand("bench", "Measure per-stage latency and possible FPS");
  be->add_option("--backend", bench_args.backend, "stub or external:<command>");
  be->add_option("--source", bench_args.source, "Directory of PNG images (default: synthetic)");
  be->add_option("--stub-timings", bench_args.stub_timings, "pre,inf,post ms for the stub")
      ->delimiter(',')
      ->expected(3);
  be->add_option("--warmup", bench_args.warmup, "Unrecorded warmup calls");
  be->add_option("--iters", bench_args.iterations, "Recorded calls")->check(CLI::PositiveNumber);
  be->add_option("--timeout-ms", bench_args.timeout_ms, "External backend timeout");
  be->add_option("--input-size", bench_args.input_size, "Synthetic image side (px)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "detbench: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }
  g.seed_given = seed_opt->count() > 0;
  if (aug_seed_opt->count() > 0) augment.seed = aug_seed;
  set_log_level(g.quiet ? LogLevel::kQuiet
                        : static_cast<LogLevel>(std::min(3, 1 + g.verbosity)));

  try {
    if (c->parsed()) return cmd_compose(g, compose, out);
    if (au->parsed()) return cmd_augment(g, augment, out);
    if (sp->parsed()) return cmd_split(g, split_args, out);
    if (ma->parsed()) return cmd_manifest(g, manifest, out);
    if (ve->parsed()) return cmd_verify(g, verify, out);
    if (ev->parsed()) return cmd_eval(g, eval, out);
    if (se->parsed()) return cmd_select(g, select, out);
    if (ru->parsed()) return cmd_run(g, run, out);
    if (be->parsed()) return cmd_bench(g, bench_args, out);
  } catch (const CLI::Error& e) {
    err << "detbench: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "detbench: " << e.what() << "\n";
    return kExitDomainError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "detbench: " << e.what() << "\n";
    return kExitDomainError;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace detbench
