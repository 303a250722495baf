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
#include <fstream>
#include <set>

#include "doctest.h"
#include "detbench/error.hpp"
#include "detbench/logging.hpp"
#include "test_util.hpp"

using namespace detbench;

namespace {

Inventory make_inventory(int normal, int difficult, int gen_real, int gen_render) {
  Inventory inv;
  for (auto [origin, n] : {std::pair{Origin::kRealNormal, normal},
                           std::pair{Origin::kRealDifficult, difficult},
                           std::pair{Origin::kGenReal, gen_real},
                           std::pair{Origin::kGenRender, gen_render}}) {
    auto e = testing::placeholder_entries(origin, n);
    inv.entries.insert(inv.entries.end(), e.begin(), e.end());
  }
  return inv;
}

Inventory reference_inventory() { return make_inventory(1672, 127, 1920, 1920); }

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

bool disjoint(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const auto sb = as_set(b);
  return std::none_of(a.begin(), a.end(), [&](const std::string& s) { return sb.count(s) > 0; });
}

bool all_with_prefix(const std::vector<std::string>& v, const std::string& prefix) {
  return std::all_of(v.begin(), v.end(),
                     [&](const std::string& s) { return s.rfind(prefix, 0) == 0; });
}

}  // namespace

TEST_CASE("table counts for any seed") {
  const auto inv = reference_inventory();
  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 123456789ULL, ~0ULL}) {
    SplitSpec spec;
    spec.seed = seed;
    const auto s = split(inv, spec);
    CHECK(s.real_train.size() == 1004);
    CHECK(s.real_val.size() == 334);
    CHECK(s.real_test.size() == 334);
    CHECK(s.real_difficult.size() == 127);
    CHECK(s.gen_real_train.size() == 1536);
    CHECK(s.gen_real_val.size() == 384);
    CHECK(s.gen_render_train.size() == 1536);
    CHECK(s.gen_render_val.size() == 384);
  }
}

TEST_CASE("floor rule on small groups") {
  const auto s = split(make_inventory(10, 0, 0, 0), SplitSpec{});
  CHECK(s.real_train.size() == 6);
  CHECK(s.real_val.size() == 2);
  CHECK(s.real_test.size() == 2);
  // Oracle: val = test = floor(0.2 N), train = rest, for a sweep of N.
  for (int n = 1; n <= 60; ++n) {
    const auto t = split(make_inventory(n, 0, n, 0), SplitSpec{});
    const auto k = static_cast<std::size_t>(n / 5);
    CHECK(t.real_val.size() == k);
    CHECK(t.real_test.size() == k);
    CHECK(t.real_train.size() == n - 2 * k);
    CHECK(t.gen_real_val.size() == k);
    CHECK(t.gen_real_train.size() == n - k);
  }
}

TEST_CASE("split conserves entries and is deterministic") {
  const auto inv = make_inventory(200, 30, 150, 90);
  SplitSpec spec;
  spec.seed = 9;
  const auto a = split(inv, spec);
  const auto b = split(inv, spec);
  CHECK(a.real_train == b.real_train);
  CHECK(a.gen_render_val == b.gen_render_val);
  std::set<std::string> normal;
  for (const auto* v : {&a.real_train, &a.real_val, &a.real_test}) {
    for (const auto& p : *v) CHECK(normal.insert(p).second);
  }
  CHECK(normal.size() == 200);
  CHECK(all_with_prefix(a.real_train, "real-normal/"));
  CHECK(all_with_prefix(a.gen_real_train, "gen-real/"));
  CHECK(all_with_prefix(a.gen_render_val, "gen-render/"));

  spec.seed = 10;
  CHECK(split(inv, spec).real_train != a.real_train);
  CHECK(a.inventory_hash == inv.content_hash());
  CHECK(a.inventory_hash.size() == 16);
}

TEST_CASE("split errors") {
  CHECK_THROWS_WITH_AS(split(make_inventory(0, 5, 5, 5), SplitSpec{}),
                       doctest::Contains("real-normal"), Error);
  CHECK_THROWS_WITH_AS(split(make_inventory(5, 5, 0, 5), SplitSpec{},
                             {Origin::kRealNormal, Origin::kGenReal}),
                       doctest::Contains("gen-real"), Error);
  SplitSpec bad;
  bad.real = {0.5, 0.2, 0.2};
  CHECK_THROWS_AS(split(make_inventory(10, 0, 0, 0), bad), ParameterError);
  Inventory dup = make_inventory(3, 0, 0, 0);
  dup.entries.push_back(dup.entries.front());
  CHECK_THROWS_AS(split(dup, SplitSpec{}), Error);
}

TEST_CASE("strategy manifests") {
  const auto s = split(reference_inventory(), SplitSpec{});
  const auto mr = build_manifest(StrategyId::kMR, s);
  CHECK(mr.train.size() == 4076);
  CHECK(mr.val.size() == 334);
  const auto gg = build_manifest(StrategyId::kGG, s);
  CHECK(gg.train.size() == 3072);
  CHECK(gg.val.size() == 768);
  for (const auto* v : {&gg.train, &gg.val}) {
    for (const auto& p : *v) CHECK(p.rfind("real-", 0) != 0);
  }
  const auto rr = build_manifest(StrategyId::kRR, s);
  const auto rg = build_manifest(StrategyId::kRG, s);
  const auto gr = build_manifest(StrategyId::kGR, s);
  CHECK(rr.train == s.real_train);
  CHECK(rr.val == s.real_val);
  CHECK(rg.train == s.real_train);
  CHECK(as_set(rg.val) == as_set(gg.val));
  CHECK(as_set(gr.train) == as_set(gg.train));
  CHECK(gr.val == s.real_val);

  // MR train equals RR train union GG train, as sets and without duplicates.
  std::set<std::string> uni = as_set(rr.train);
  for (const auto& p : gg.train) uni.insert(p);
  CHECK(as_set(mr.train) == uni);
  CHECK(mr.train.size() == uni.size());

  for (const auto* m : {&rr, &rg, &gg, &gr, &mr}) {
    CHECK(m->test_normal == s.real_test);
    CHECK(m->test_difficult == s.real_difficult);
    CHECK(disjoint(m->train, m->val));
    for (const auto* t : {&m->test_normal, &m->test_difficult}) {
      CHECK(disjoint(m->train, *t));
      CHECK(disjoint(m->val, *t));
    }
    CHECK(m->inventory_hash == s.inventory_hash);
  }
}

TEST_CASE("build_manifest requires the groups a strategy draws from") {
  const auto s = split(make_inventory(20, 4, 0, 0), SplitSpec{});
  CHECK_NOTHROW(build_manifest(StrategyId::kRR, s));
  CHECK_THROWS_AS(build_manifest(StrategyId::kGG, s), Error);
  CHECK_THROWS_AS(build_manifest(StrategyId::kMR, s), Error);
  CHECK_THROWS_AS(build_manifest(StrategyId::kRG, s), Error);
}

TEST_CASE("strategy names") {
  for (auto id : kAllStrategies) CHECK(parse_strategy(strategy_name(id)) == id);
  CHECK(parse_strategy("M-R") == StrategyId::kMR);
  CHECK(parse_strategy("Gg") == StrategyId::kGG);
  CHECK_FALSE(parse_strategy("xx"));
}

TEST_CASE("json round-trips") {
  const auto inv = make_inventory(30, 5, 20, 20);
  const auto back_inv = inventory_from_json(inventory_to_json(inv));
  CHECK(back_inv.content_hash() == inv.content_hash());

  SplitSpec spec;
  spec.seed = 77;
  const auto s = split(inv, spec);
  const auto back = splits_from_json(splits_to_json(s));
  CHECK(back.real_train == s.real_train);
  CHECK(back.gen_render_val == s.gen_render_val);
  CHECK(back.spec.seed == 77);
  CHECK(back.inventory_hash == s.inventory_hash);

  const auto m = build_manifest(StrategyId::kMR, s);
  const auto mb = manifest_from_json(manifest_to_json(m));
  CHECK(mb.strategy == StrategyId::kMR);
  CHECK(mb.train == m.train);
  CHECK(mb.test_difficult == m.test_difficult);
  CHECK(manifest_to_json(mb) == manifest_to_json(m));
  CHECK_THROWS_AS(manifest_from_json("{}"), Error);
}

TEST_CASE("verify_manifest on disk") {
  testing::ScratchDir dir("strategy");
  const auto inv = make_inventory(10, 2, 5, 5);
  for (const auto& e : inv.entries) {
    const auto img = dir.path() / e.path;
    std::filesystem::create_directories(img.parent_path());
    std::ofstream(img) << "png";
    std::ofstream(dir.path() / label_path_for(e.path)) << "0 0.5 0.5 0.2 0.2";
  }
  const auto s = split(inv, SplitSpec{});
  auto m = build_manifest(StrategyId::kMR, s);
  CHECK(verify_manifest(m, dir.str()).pass());

  SUBCASE("leak") {
    m.train.push_back(m.test_normal.front());
    const auto r = verify_manifest(m, dir.str());
    CHECK_FALSE(r.pass());
    bool found = false;
    for (const auto& v : r.violations) found |= v.kind == "leak" && v.path == m.test_normal.front();
    CHECK(found);
  }
  SUBCASE("missing label") {
    std::filesystem::remove(dir.path() / label_path_for(m.val.front()));
    const auto r = verify_manifest(m, dir.str());
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].kind == "missing-label");
  }
  SUBCASE("missing file") {
    std::filesystem::remove(dir.path() / m.train.back());
    const auto r = verify_manifest(m, dir.str());
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].kind == "missing-file");
  }
  SUBCASE("bad label") {
    std::ofstream(dir.path() / label_path_for(m.train.front())) << "0 0.5 0.5 7 0.2";
    const auto r = verify_manifest(m, dir.str());
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].kind == "bad-label");
  }
}

TEST_CASE("inventory discovery by directory") {
  testing::ScratchDir dir("inventory");
  for (const char* sub : {"real-normal", "gen-render"}) {
    std::filesystem::create_directories(dir.path() / sub);
    for (int i = 0; i < 3; ++i) {
      save_png((dir.path() / sub / ("im" + std::to_string(i) + ".png")).string(), Image(4, 4, 0));
    }
  }
  const auto inv = load_inventory(dir.str());
  CHECK(inv.entries.size() == 6);
  CHECK(inv.with_origin(Origin::kGenRender).size() == 3);
  CHECK(label_path_for("images/a.png") == "images/a.txt");
  CHECK(label_path_for("x/y.z/a") == "x/y.z/a.txt");
}
