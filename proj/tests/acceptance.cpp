// Copyright 2026 The CPT Toolkit Authors.
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


// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "cpt/cpt.hpp"
#include "properties.hpp"

namespace {

using namespace cpt;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool ok;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::filesystem::path work_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "cpt_acceptance" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

constexpr std::uint64_t kSceneSeed = 20240601;

std::filesystem::path scenes() {
  static const auto dir = [] {
    auto d = work_dir("scenes");
    write_synthetic(d, generate_synthetic_grounding(200, 6, kSceneSeed));
    return d;
  }();
  return dir;
}

Outcome end_to_end() {
  RunConfig c;
  c.mode = "toolkit";
  c.color_set = "cps";
  c.alpha = 0.5;
  c.capacity = 6;
  c.jobs = 1;
  const auto t0 = Clock::now();
  auto s = cmd_ground(scenes() / "data.jsonl", work_dir("ground6"), c);
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "accuracy=" << format_double(s.accuracy) << " scenes=" << s.instances << " errors=" << s.errors
    << " time=" << secs << "s";
  return {s.accuracy == 1.0 && s.instances == 200 && s.errors == 0 && secs < 30.0, d.str()};
}

Outcome capacity_one() {
  RunConfig c;
  c.mode = "toolkit";
  c.color_set = "cps";
  c.capacity = 1;
  auto s = cmd_ground(scenes() / "data.jsonl", work_dir("ground1"), c);
  const auto data = load_grounding(scenes() / "data.jsonl");
  std::map<std::string, std::size_t> k;
  for (const auto& g : data) k[g.id] = g.proposals.size();
  std::size_t bad_calls = 0;
  for (const auto& p : s.predictions) bad_calls += p.backend_calls != k.at(p.id);
  std::ostringstream d;
  d << "accuracy=" << format_double(s.accuracy) << " scenes_with_wrong_call_count=" << bad_calls;
  return {s.accuracy == 1.0 && s.instances == 200 && bad_calls == 0, d.str()};
}

Outcome planted_recovery() {
  const auto planted = preset_cps_colors();
  std::vector<ColorText> texts;
  std::vector<std::vector<Rgb>> grids;
  std::size_t largest = 0;
  for (const auto& c : planted.colors()) {
    texts.push_back(c.text);
    grids.push_back(build_rgb_grid(c.visual, 30, 5));
    largest = std::max(largest, grids.back().size());
  }
  const auto t0 = Clock::now();
  CandidateSets cands(texts, merge_rgb_grids(grids));
  PlantedProbeBackend backend{NamedColorTable(planted.colors())};
  auto got_set = search(probe_scores(backend, cands, cps_probe_template(), {2, 1}), 0.8);
  const double secs = seconds_since(t0);
  std::set<std::pair<Rgb, std::string>> got, want;
  for (const auto& c : got_set.colors()) got.insert({c.visual, c.text.str()});
  for (const auto& c : planted.colors()) want.insert({c.visual, c.text.str()});
  std::ostringstream d;
  d << "recovered=" << got_set.size() << "/6 candidates=" << cands.visuals.size() << " largest_grid=" << largest
    << " time=" << secs << "s";
  return {got == want && got_set.size() == 6 && largest <= 2197 && secs < 10.0, d.str()};
}

Outcome numeric_invariants() {
  const auto f = props::run_softmax_invariants(1000, 11);
  std::ostringstream d;
  d << "failures normalization=" << f.normalization << " shift=" << f.shift << " argmax=" << f.argmax;
  return {f.normalization == 0 && f.shift == 0 && f.argmax == 0, d.str()};
}

Outcome batching_properties() {
  const auto f = props::run_batching_properties(1000, 12);
  std::ostringstream d;
  d << "failures partition/capacity/overlap=" << f.partition_capacity_overlap << " determinism=" << f.determinism;
  if (!f.first.empty()) d << " first: " << f.first;
  return {f.partition_capacity_overlap == 0 && f.determinism == 0, d.str()};
}

Outcome blending_golden() {
  RasterImage black(4, 4, Rgb{0, 0, 0});
  auto out = apply_visual_subprompt(black, {{make_box(0, 0, 2, 2), std::nullopt, Color{{240, 0, 30}, ColorText("red")}}},
                                    Transparency{0.5}, PromptShape::kBlock);
  bool ok = true;
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      const Rgb want = x < 2 && y < 2 ? Rgb{120, 0, 15} : Rgb{0, 0, 0};
      ok = ok && out.at(x, y) == want;
    }
  }
  const bool round_trip = decode_png_rgb(encode_png(out)) == out;
  std::ostringstream d;
  d << "corner=" << to_string(out.at(0, 0)) << " far=" << to_string(out.at(1, 1)) << " outside="
    << to_string(out.at(2, 2)) << " png_round_trip=" << (round_trip ? "exact" : "differs");
  return {ok && round_trip, d.str()};
}

Outcome metric_oracle() {
  const auto corpus = props::toy_vrd_corpus();
  std::size_t triplets = 0;
  for (const auto& img : corpus) triplets += img.ranked.size();
  bool ok = corpus.size() == 3 && triplets <= 10;
  std::ostringstream d;
  for (std::size_t n : {1, 2, 5}) {
    const double r = recall_at_n(corpus, n), mr = mean_recall_at_n(corpus, n);
    ok = ok && r == props::brute_recall(corpus, n) && mr == props::brute_mean_recall(corpus, n);
    d << "R@" << n << "=" << format_double(r) << " mR@" << n << "=" << format_double(mr) << " ";
  }
  const double a = iou(make_box(0, 0, 10, 10), make_box(0, 0, 10, 10));
  const double b = iou(make_box(0, 0, 10, 10), make_box(20, 20, 5, 5));
  const double c = iou(make_box(0, 0, 10, 10), make_box(5, 5, 10, 10));
  ok = ok && std::abs(a - 1.0) <= 1e-12 && std::abs(b) <= 1e-12 && std::abs(c - 1.0 / 7.0) <= 1e-12;
  d << "IoU=" << format_double(a) << "/" << format_double(b) << "/" << format_double(c);
  return {ok, d.str()};
}

Outcome split_determinism() {
  std::vector<std::string> pool;
  for (int i = 0; i < 100; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "id-%03d", i);
    pool.push_back(id);
  }
  int mismatched = 0;
  for (int k = 1; k <= 16; ++k) {
    std::ifstream in(std::filesystem::path(CPT_TEST_DIR) / "golden" / "splits" / ("k" + std::to_string(k) + ".txt"),
                     std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    mismatched += !in || format_splits(sample_splits(pool, {k, 5, 1234, 16, false})) != ss.str();
  }
  std::mt19937_64 eng(13);
  int overlapping = 0;
  for (int i = 0; i < 1000; ++i) {
    const int n = static_cast<int>(eng() % 80) + 1;
    const int k = static_cast<int>(eng() % static_cast<std::uint64_t>(n + 1));
    const int v = static_cast<int>(eng() % static_cast<std::uint64_t>(n - k + 1));
    const int splits = static_cast<int>(eng() % 6) + 1;
    const SplitSpec spec{k, splits, eng(), v, false};
    for (const auto& s : sample_splits(std::vector<std::string>(pool.begin(), pool.begin() + n), spec)) {
      std::set<std::string> train(s.train.begin(), s.train.end());
      bool bad = train.size() != static_cast<std::size_t>(k) || s.val.size() != static_cast<std::size_t>(v);
      for (const auto& id : s.val) bad = bad || train.contains(id);
      overlapping += bad;
    }
  }
  std::ostringstream d;
  d << "golden_mismatches=" << mismatched << "/16 bad_random_splits=" << overlapping;
  return {mismatched == 0 && overlapping == 0, d.str()};
}

LogProbMap slot(const std::string& token, double lp, const std::string& other) {
  return {{token, lp}, {other, std::log1p(-std::exp(lp))}};
}

Outcome relation_scoring() {
  const double c1 = -0.05, c2 = -1.3, c3 = -0.7;
  std::map<int, MaskDistribution> dists;
  dists.emplace(1, MaskDistribution({slot("wearing", -0.2, "irrelevant")}));
  dists.emplace(2, MaskDistribution({slot("walking", -0.1, "no"), slot("on", -0.5, "relation")}));
  dists.emplace(3, MaskDistribution({slot("parked", c1, "no"), slot("next", c2, "relation"), slot("to", c3, "with")}));
  const auto t = score_relations(dists, make_relation_vocab({"wearing", "walking on", "parked next to"}));
  const bool means = t.scores.at("wearing") == -0.2 && t.scores.at("walking on") == -0.3 &&
                     t.scores.at("parked next to") == (c1 + c2 + c3) / 3.0;
  const bool na = na_relation(1).tokens == std::vector<std::string>{"irrelevant"} &&
                  na_relation(2).tokens == std::vector<std::string>{"no", "relation"} &&
                  na_relation(3).tokens == std::vector<std::string>{"no", "relation", "with"};
  std::ostringstream d;
  d << "s(l=1)=" << format_double(t.scores.at("wearing")) << " s(l=2)=" << format_double(t.scores.at("walking on"))
    << " s(l=3)=" << format_double(t.scores.at("parked next to")) << " NA=" << na_relation(1).label << ", "
    << na_relation(2).label << ", " << na_relation(3).label;
  return {means && na, d.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"end-to-end synthetic grounding (200 scenes, CPS, capacity 6)", end_to_end},
      {"batch size 1 faithfulness (k calls per scene)", capacity_one},
      {"CPS planted recovery", planted_recovery},
      {"numerical invariants (1000 cases each)", numeric_invariants},
      {"batching properties (1000 proposal sets)", batching_properties},
      {"blending golden and PNG round trip", blending_golden},
      {"metric oracle equivalence and IoU cases", metric_oracle},
      {"split determinism and disjointness", split_determinism},
      {"relation scoring means and NA tokens", relation_scoring},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.ok;
    std::printf("%s  %s  [%s]\n", o.ok ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
