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

#include "detbench/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <unordered_set>

#include "json.hpp"

#include "detbench/error.hpp"
#include "detbench/logging.hpp"
#include "detbench/rng.hpp"

namespace detbench {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<Origin, 5> kOrigins = {Origin::kRealNormal, Origin::kRealDifficult,
                                            Origin::kGenReal, Origin::kGenRender,
                                            Origin::kBackgroundOnly};

bool is_image_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::size_t floor_share(double ratio, std::size_t n) {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
}

std::vector<std::string> shuffled_paths(const Inventory& inv, Origin origin, std::uint64_t seed) {
  std::vector<std::string> paths;
  for (const auto* e : inv.with_origin(origin)) paths.push_back(e->path);
  std::sort(paths.begin(), paths.end());
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(origin)));
  for (std::size_t i = paths.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(paths[i - 1], paths[j]);
  }
  return paths;
}

std::vector<std::string> sorted_slice(const std::vector<std::string>& v, std::size_t begin,
                                      std::size_t end) {
  std::vector<std::string> out(v.begin() + static_cast<std::ptrdiff_t>(begin),
                               v.begin() + static_cast<std::ptrdiff_t>(end));
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> merged(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  return a;
}

void require_nonempty(const std::vector<std::string>& group, const char* name, StrategyId s) {
  if (group.empty()) {
    throw Error("strategy " + std::string(strategy_name(s)) + " requires " + name +
                " but it is empty");
  }
}

}  // namespace

void Inventory::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.path).second) throw Error("duplicate inventory path " + e.path);
    if (e.origin == Origin::kBackgroundOnly && !e.objects.empty()) {
      throw Error("background-only entry " + e.path + " has ground truth");
    }
  }
}

std::vector<const ImageEntry*> Inventory::with_origin(Origin origin) const {
  std::vector<const ImageEntry*> out;
  for (const auto& e : entries) {
    if (e.origin == origin) out.push_back(&e);
  }
  return out;
}

std::string Inventory::content_hash() const {
  std::vector<std::string> keys;
  keys.reserve(entries.size());
  for (const auto& e : entries) keys.push_back(e.path + '\t' + std::string(origin_name(e.origin)));
  std::sort(keys.begin(), keys.end());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& k : keys) {
    for (unsigned char c : k) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= '\n';
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string inventory_to_json(const Inventory& inventory) {
  json entries = json::array();
  for (const auto& e : inventory.entries) {
    entries.push_back({{"path", e.path},
                       {"origin", std::string(origin_name(e.origin))},
                       {"width", e.width},
                       {"height", e.height},
                       {"objects", e.objects.size()}});
  }
  return json{{"entries", entries}}.dump(2) + "\n";
}

Inventory inventory_from_json(std::string_view text) {
  Inventory inv;
  try {
    const json doc = json::parse(text);
    for (const auto& item : doc.at("entries")) {
      ImageEntry e;
      e.path = item.at("path").get<std::string>();
      const auto origin = parse_origin(item.at("origin").get<std::string>());
      if (!origin) throw ParseError("unknown origin tag in entry " + e.path);
      e.origin = *origin;
      e.width = item.value("width", 0);
      e.height = item.value("height", 0);
      inv.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("inventory: ") + e.what());
  }
  inv.validate();
  return inv;
}

Inventory load_inventory(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw IoError("inventory directory not found: " + dir);
  if (fs::exists(root / "inventory.json")) {
    return inventory_from_json(read_text_file((root / "inventory.json").string()));
  }
  Inventory inv;
  for (Origin origin : kOrigins) {
    const fs::path sub = root / std::string(origin_name(origin));
    if (!fs::is_directory(sub)) continue;
    std::vector<std::string> paths;
    for (const auto& e : fs::recursive_directory_iterator(sub)) {
      if (e.is_regular_file() && is_image_file(e.path())) {
        paths.push_back(fs::relative(e.path(), root).generic_string());
      }
    }
    std::sort(paths.begin(), paths.end());
    for (auto& p : paths) inv.entries.push_back(ImageEntry{std::move(p), 0, 0, {}, origin});
  }
  if (inv.entries.empty()) throw IoError("no images found in inventory " + dir);
  inv.validate();
  return inv;
}

void SplitSpec::validate() const {
  const double rs = real[0] + real[1] + real[2];
  const double gs = generated[0] + generated[1];
  auto nonneg = [](double v) { return v >= 0.0; };
  if (std::abs(rs - 1.0) > 1e-9 || !std::all_of(real.begin(), real.end(), nonneg)) {
    throw ParameterError("real split ratios must be non-negative and sum to 1");
  }
  if (std::abs(gs - 1.0) > 1e-9 || !std::all_of(generated.begin(), generated.end(), nonneg)) {
    throw ParameterError("generated split ratios must be non-negative and sum to 1");
  }
}

std::string_view strategy_name(StrategyId id) {
  switch (id) {
    case StrategyId::kRR: return "rr";
    case StrategyId::kRG: return "rg";
    case StrategyId::kGG: return "gg";
    case StrategyId::kGR: return "gr";
    case StrategyId::kMR: return "mr";
  }
  return "unknown";
}

std::optional<StrategyId> parse_strategy(std::string_view name) {
  std::string lower;
  for (char c : name) {
    if (c != '-') lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  for (StrategyId s : kAllStrategies) {
    if (strategy_name(s) == lower) return s;
  }
  return std::nullopt;
}

std::vector<std::string> SplitSets::gen_train() const {
  return merged(gen_real_train, gen_render_train);
}

std::vector<std::string> SplitSets::gen_val() const { return merged(gen_real_val, gen_render_val); }

SplitSets split(const Inventory& inventory, const SplitSpec& spec,
                const std::set<Origin>& required) {
  spec.validate();
  inventory.validate();
  for (Origin o : required) {
    if (inventory.with_origin(o).empty()) {
      throw Error("inventory group " + std::string(origin_name(o)) + " is empty");
    }
  }
  SplitSets out;
  out.spec = spec;
  out.inventory_hash = inventory.content_hash();

  const auto real = shuffled_paths(inventory, Origin::kRealNormal, spec.seed);
  const std::size_t n = real.size();
  const std::size_t n_val = floor_share(spec.real[1], n);
  const std::size_t n_test = floor_share(spec.real[2], n);
  const std::size_t n_train = n - n_val - n_test;
  out.real_train = sorted_slice(real, 0, n_train);
  out.real_val = sorted_slice(real, n_train, n_train + n_val);
  out.real_test = sorted_slice(real, n_train + n_val, n);

  const auto difficult = shuffled_paths(inventory, Origin::kRealDifficult, spec.seed);
  out.real_difficult = sorted_slice(difficult, 0, difficult.size());

  auto split_generated = [&](Origin origin, std::vector<std::string>& train,
                             std::vector<std::string>& val) {
    const auto paths = shuffled_paths(inventory, origin, spec.seed);
    const std::size_t m_val = floor_share(spec.generated[1], paths.size());
    const std::size_t m_train = paths.size() - m_val;
    train = sorted_slice(paths, 0, m_train);
    val = sorted_slice(paths, m_train, paths.size());
  };
  split_generated(Origin::kGenReal, out.gen_real_train, out.gen_real_val);
  split_generated(Origin::kGenRender, out.gen_render_train, out.gen_render_val);
  return out;
}

ExperimentManifest build_manifest(StrategyId strategy, const SplitSets& s) {
  ExperimentManifest m;
  m.strategy = strategy;
  m.spec = s.spec;
  m.inventory_hash = s.inventory_hash;
  const auto gen_train = s.gen_train();
  const auto gen_val = s.gen_val();
  switch (strategy) {
    case StrategyId::kRR:
      require_nonempty(s.real_train, "real-train", strategy);
      require_nonempty(s.real_val, "real-val", strategy);
      m.train = s.real_train;
      m.val = s.real_val;
      break;
    case StrategyId::kRG:
      require_nonempty(s.real_train, "real-train", strategy);
      require_nonempty(gen_val, "gen-val", strategy);
      m.train = s.real_train;
      m.val = gen_val;
      break;
    case StrategyId::kGG:
      require_nonempty(gen_train, "gen-train", strategy);
      require_nonempty(gen_val, "gen-val", strategy);
      m.train = gen_train;
      m.val = gen_val;
      break;
    case StrategyId::kGR:
      require_nonempty(gen_train, "gen-train", strategy);
      require_nonempty(s.real_val, "real-val", strategy);
      m.train = gen_train;
      m.val = s.real_val;
      break;
    case StrategyId::kMR:
      require_nonempty(s.real_train, "real-train", strategy);
      require_nonempty(gen_train, "gen-train", strategy);
      require_nonempty(s.real_val, "real-val", strategy);
      m.train = merged(s.real_train, gen_train);
      m.val = s.real_val;
      break;
  }
  require_nonempty(s.real_test, "real-test", strategy);
  m.test_normal = s.real_test;
  m.test_difficult = s.real_difficult;
  if (m.test_difficult.empty()) {
    log_warning("strategy " + std::string(strategy_name(strategy)) +
                ": test-difficult set is empty");
  }
  return m;
}

std::string label_path_for(const std::string& image_path) {
  fs::path p(image_path);
  p.replace_extension(".txt");
  return p.generic_string();
}

VerifyReport verify_manifest(const ExperimentManifest& m, const std::string& root) {
  VerifyReport report;
  std::map<std::string, std::string> test_owner;
  for (const auto& p : m.test_normal) test_owner.emplace(p, "test-normal");
  for (const auto& p : m.test_difficult) test_owner.emplace(p, "test-difficult");
  const std::set<std::string> train(m.train.begin(), m.train.end());

  auto check_leak = [&](const std::vector<std::string>& list, const char* name) {
    for (const auto& p : list) {
      if (auto it = test_owner.find(p); it != test_owner.end()) {
        report.violations.push_back({"leak", p, std::string(name) + " item also in " + it->second});
      }
    }
  };
  check_leak(m.train, "train");
  check_leak(m.val, "val");
  for (const auto& p : m.val) {
    if (train.count(p)) report.violations.push_back({"overlap", p, "listed in train and val"});
  }

  auto check_files = [&](const std::vector<std::string>& list) {
    for (const auto& p : list) {
      const fs::path image = fs::path(root) / p;
      if (!fs::exists(image)) {
        report.violations.push_back({"missing-file", p, "image not found"});
        continue;
      }
      const fs::path label = fs::path(root) / label_path_for(p);
      if (!fs::exists(label)) {
        report.violations.push_back({"missing-label", p, label.generic_string() + " not found"});
        continue;
      }
      try {
        (void)read_label_file(label.string());
      } catch (const Error& e) {
        report.violations.push_back({"bad-label", p, e.what()});
      }
    }
  };
  check_files(m.train);
  check_files(m.val);
  check_files(m.test_normal);
  check_files(m.test_difficult);
  return report;
}

namespace {

json spec_json(const SplitSpec& spec) {
  return {{"real", spec.real}, {"generated", spec.generated}};
}

SplitSpec spec_from(const json& doc) {
  SplitSpec spec;
  spec.seed = doc.at("seed").get<std::uint64_t>();
  const auto& r = doc.at("split");
  spec.real = r.at("real").get<std::array<double, 3>>();
  spec.generated = r.at("generated").get<std::array<double, 2>>();
  return spec;
}

}  // namespace

std::string manifest_to_json(const ExperimentManifest& m) {
  const json doc = {{"strategy", std::string(strategy_name(m.strategy))},
                    {"seed", m.spec.seed},
                    {"split", spec_json(m.spec)},
                    {"inventory_hash", m.inventory_hash},
                    {"train", m.train},
                    {"val", m.val},
                    {"test_normal", m.test_normal},
                    {"test_difficult", m.test_difficult}};
  return doc.dump(2) + "\n";
}

ExperimentManifest manifest_from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    ExperimentManifest m;
    const auto s = parse_strategy(doc.at("strategy").get<std::string>());
    if (!s) throw ParseError("unknown strategy in manifest");
    m.strategy = *s;
    m.spec = spec_from(doc);
    m.inventory_hash = doc.value("inventory_hash", "");
    m.train = doc.at("train").get<std::vector<std::string>>();
    m.val = doc.at("val").get<std::vector<std::string>>();
    m.test_normal = doc.at("test_normal").get<std::vector<std::string>>();
    m.test_difficult = doc.at("test_difficult").get<std::vector<std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
}

std::string splits_to_json(const SplitSets& s) {
  const json doc = {{"seed", s.spec.seed},
                    {"split", spec_json(s.spec)},
                    {"inventory_hash", s.inventory_hash},
                    {"real_train", s.real_train},
                    {"real_val", s.real_val},
                    {"real_test", s.real_test},
                    {"real_difficult", s.real_difficult},
                    {"gen_real_train", s.gen_real_train},
                    {"gen_real_val", s.gen_real_val},
                    {"gen_render_train", s.gen_render_train},
                    {"gen_render_val", s.gen_render_val}};
  return doc.dump(2) + "\n";
}

SplitSets splits_from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    SplitSets s;
    s.spec = spec_from(doc);
    s.inventory_hash = doc.value("inventory_hash", "");
    auto list = [&](const char* key) { return doc.at(key).get<std::vector<std::string>>(); };
    s.real_train = list("real_train");
    s.real_val = list("real_val");
    s.real_test = list("real_test");
    s.real_difficult = list("real_difficult");
    s.gen_real_train = list("gen_real_train");
    s.gen_real_val = list("gen_real_val");
    s.gen_render_train = list("gen_render_train");
    s.gen_render_val = list("gen_render_val");
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("splits: ") + e.what());
  }
}

std::string verify_report_to_json(const VerifyReport& report) {
  json violations = json::array();
  for (const auto& v : report.violations) {
    violations.push_back({{"kind", v.kind}, {"path", v.path}, {"detail", v.detail}});
  }
  return json{{"pass", report.pass()}, {"violations", violations}}.dump(2) + "\n";
}

}  // namespace detbench
