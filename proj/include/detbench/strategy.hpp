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

// Train/validation/test splitting and the five experiment strategies.

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "detbench/annotation.hpp"

namespace detbench {

struct Inventory {
  std::vector<ImageEntry> entries;

  /// Throws Error on duplicate paths.
  void validate() const;
  std::vector<const ImageEntry*> with_origin(Origin origin) const;
  /// FNV-1a over the sorted (path, origin) list, as 16 hex digits.
  std::string content_hash() const;
};

/// Reads `<dir>/inventory.json` if present, otherwise scans the subdirectories
/// real-normal/, real-difficult/, gen-real/, gen-render/ and background-only/
/// for images. Paths are relative to `dir`.
Inventory load_inventory(const std::string& dir);
std::string inventory_to_json(const Inventory& inventory);
Inventory inventory_from_json(std::string_view text);

struct SplitSpec {
  std::array<double, 3> real{0.6, 0.2, 0.2};  // train, val, test
  std::array<double, 2> generated{0.8, 0.2};  // train, val
  std::uint64_t seed = 0;

  void validate() const;
};

enum class StrategyId { kRR, kRG, kGG, kGR, kMR };

inline constexpr std::array<StrategyId, 5> kAllStrategies = {
    StrategyId::kRR, StrategyId::kRG, StrategyId::kGG, StrategyId::kGR, StrategyId::kMR};

/// Lower-case short name: "rr", "rg", "gg", "gr", "mr".
std::string_view strategy_name(StrategyId id);
std::optional<StrategyId> parse_strategy(std::string_view name);

struct SplitSets {
  std::vector<std::string> real_train;
  std::vector<std::string> real_val;
  std::vector<std::string> real_test;
  std::vector<std::string> real_difficult;
  std::vector<std::string> gen_real_train;
  std::vector<std::string> gen_real_val;
  std::vector<std::string> gen_render_train;
  std::vector<std::string> gen_render_val;
  SplitSpec spec;
  std::string inventory_hash;

  std::vector<std::string> gen_train() const;
  std::vector<std::string> gen_val() const;
};

/// Shuffles each origin group with the seed and partitions it. Validation and
/// test take floor(ratio * N); train takes the remainder. Generated subsets are
/// split independently. Real-difficult goes entirely to test. Throws Error
/// naming any origin in `required` that has no entries.
SplitSets split(const Inventory& inventory, const SplitSpec& spec,
                const std::set<Origin>& required = {Origin::kRealNormal});

struct ExperimentManifest {
  StrategyId strategy = StrategyId::kRR;
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test_normal;
  std::vector<std::string> test_difficult;
  SplitSpec spec;
  std::string inventory_hash;
};

/// Throws Error if a group the strategy draws from is empty.
ExperimentManifest build_manifest(StrategyId strategy, const SplitSets& splits);

struct Violation {
  std::string kind;  // leak, overlap, missing-file, missing-label, bad-label
  std::string path;
  std::string detail;
};

struct VerifyReport {
  std::vector<Violation> violations;
  bool pass() const { return violations.empty(); }
};

/// Checks disjointness, then file and label presence under `root`.
VerifyReport verify_manifest(const ExperimentManifest& manifest, const std::string& root);

/// `images/a.png` -> `images/a.txt`.
std::string label_path_for(const std::string& image_path);

std::string manifest_to_json(const ExperimentManifest& manifest);
ExperimentManifest manifest_from_json(std::string_view text);
std::string splits_to_json(const SplitSets& splits);
SplitSets splits_from_json(std::string_view text);
std::string verify_report_to_json(const VerifyReport& report);

}  // namespace detbench
