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


#include <fstream>
#include <set>
#include <sstream>

#include "cpt/evalkit.hpp"
#include "properties.hpp"
#include "test_util.hpp"

namespace cpt {
namespace {

TEST(Iou, ExactCases) {
  EXPECT_EQ(iou(make_box(0, 0, 10, 10), make_box(0, 0, 10, 10)), 1.0);
  EXPECT_EQ(iou(make_box(0, 0, 10, 10), make_box(20, 20, 5, 5)), 0.0);
  EXPECT_NEAR(iou(make_box(0, 0, 10, 10), make_box(5, 5, 10, 10)), 1.0 / 7.0, 1e-12);
  EXPECT_EQ(iou(make_box(0, 0, 10, 10), make_box(10, 0, 10, 10)), 0.0);
}

TEST(Iou, SymmetricAndBounded) {
  testing::Gen gen(61);
  for (int i = 0; i < 1000; ++i) {
    auto a = gen.real_box(50), b = gen.real_box(50);
    const double v = iou(a, b);
    ASSERT_EQ(v, iou(b, a));
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
}

GroundingOutcome with_iou(double target) {
  // gold (0,0,1,1); predicted (0,0,t,1) for t <= 1 has IoU t.
  return {make_box(0, 0, target, 1), make_box(0, 0, 1, 1)};
}

TEST(Accuracy, StrictThreshold) {
  EXPECT_EQ(grounding_accuracy({with_iou(0.6), with_iou(0.4)}), 0.5);
  EXPECT_EQ(grounding_accuracy({{std::nullopt, make_box(0, 0, 1, 1)}, {std::nullopt, make_box(0, 0, 1, 1)}}), 0.0);
  EXPECT_EQ(iou(*with_iou(0.5).predicted, with_iou(0.5).gold), 0.5);
  EXPECT_EQ(grounding_accuracy({with_iou(0.5)}), 0.0);
  EXPECT_EQ(grounding_accuracy({}), 0.0);
}

Triplet t(const char* s, const char* r, const char* o) { return {s, r, o}; }

TEST(Recall, SmallCases) {
  RankedImage img{{t("a", "on", "b"), t("c", "near", "d")}, {t("a", "on", "b"), t("e", "on", "f")}};
  EXPECT_EQ(recall_at_n({img}, 2), 0.5);
  RankedImage all{{t("a", "on", "b"), t("e", "on", "f")}, {t("a", "on", "b"), t("e", "on", "f")}};
  EXPECT_EQ(recall_at_n({all}, 2), 1.0);
  EXPECT_EQ(mean_recall_at_n({img}, 2), recall_at_n({img}, 2));
  EXPECT_CPT_ERROR(recall_at_n({img}, 0), ErrorKind::kInvalidArgument);
}

TEST(Recall, MeanRecallIsUnweighted) {
  // label "on": 3 gold, all found; label "near": 1 gold, missed.
  RankedImage img{{t("a", "on", "b"), t("c", "on", "d"), t("e", "on", "f")},
                  {t("a", "on", "b"), t("c", "on", "d"), t("e", "on", "f"), t("x", "near", "y")}};
  EXPECT_EQ(mean_recall_at_n({img}, 3), 0.5);
  EXPECT_EQ(recall_at_n({img}, 3), 0.75);
}

TEST(Recall, ToyCorpusMatchesBruteForce) {
  const auto corpus = props::toy_vrd_corpus();
  for (std::size_t n : {1, 2, 3, 5, 100}) {
    EXPECT_EQ(recall_at_n(corpus, n), props::brute_recall(corpus, n)) << n;
    EXPECT_EQ(mean_recall_at_n(corpus, n), props::brute_mean_recall(corpus, n)) << n;
  }
  // Hand-computed: gold ranks are on/horse 0, wearing/hat 3, near/chair 1,
  // near/plate 2, near/tree 2, on/bike 1.
  EXPECT_EQ(recall_at_n(corpus, 1), 1.0 / 6.0);
  EXPECT_EQ(recall_at_n(corpus, 2), 0.5);
  EXPECT_EQ(recall_at_n(corpus, 5), 1.0);
  EXPECT_NEAR(mean_recall_at_n(corpus, 1), 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(mean_recall_at_n(corpus, 2), 4.0 / 9.0, 1e-15);
  EXPECT_EQ(mean_recall_at_n(corpus, 5), 1.0);
}

TEST(Recall, RandomCorporaMatchBruteForce) {
  testing::Gen gen(67);
  const char* labels[] = {"on", "near", "has", "wearing"};
  for (int i = 0; i < 500; ++i) {
    std::vector<RankedImage> corpus(static_cast<std::size_t>(gen.integer(1, 4)));
    for (auto& img : corpus) {
      std::vector<Triplet> pool;
      for (int k = 0; k < 6; ++k) pool.push_back({"s" + std::to_string(k), labels[gen.integer(0, 3)], "o"});
      std::shuffle(pool.begin(), pool.end(), gen.engine());
      img.ranked.assign(pool.begin(), pool.begin() + gen.integer(0, 6));
      for (const auto& p : pool) {
        if (gen.coin()) img.gold.insert(p);
      }
    }
    const auto n = static_cast<std::size_t>(gen.integer(1, 7));
    ASSERT_EQ(recall_at_n(corpus, n), props::brute_recall(corpus, n));
    ASSERT_EQ(mean_recall_at_n(corpus, n), props::brute_mean_recall(corpus, n));
  }
}

std::vector<std::string> pool_of(int n) {
  std::vector<std::string> out;
  char buf[16];
  for (int i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof buf, "id-%03d", i);
    out.push_back(buf);
  }
  return out;
}

TEST(Splits, GoldenFilesFromIndependentOracle) {
  for (int k = 1; k <= 16; ++k) {
    std::ifstream in(testing::source_dir() / "golden" / "splits" / ("k" + std::to_string(k) + ".txt"),
                     std::ios::binary);
    ASSERT_TRUE(in) << k;
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_EQ(format_splits(sample_splits(pool_of(100), {k, 5, 1234, 16, false})), ss.str()) << "k=" << k;
  }
}

TEST(Splits, ZeroShotAndDeterminism) {
  auto s = sample_splits(pool_of(30), {0, 5, 7, 16, false});
  ASSERT_EQ(s.size(), 5u);
  for (const auto& x : s) {
    EXPECT_TRUE(x.train.empty());
    EXPECT_EQ(x.val.size(), 16u);
  }
  EXPECT_EQ(s, sample_splits(pool_of(30), {0, 5, 7, 16, false}));
  EXPECT_NE(sample_splits(pool_of(30), {4, 5, 7, 16, false}), sample_splits(pool_of(30), {4, 5, 8, 16, false}));
  EXPECT_CPT_ERROR(sample_splits(pool_of(10), {1, 5, 7, 16, false}), ErrorKind::kPoolTooSmall);
  EXPECT_CPT_ERROR(sample_splits(pool_of(10), {-1, 5, 7, 1, false}), ErrorKind::kInvalidArgument);
}

TEST(Splits, DisjointOverRandomSpecs) {
  testing::Gen gen(71);
  for (int i = 0; i < 1000; ++i) {
    const int n = gen.integer(1, 80);
    const int k = gen.integer(0, n);
    const int v = gen.integer(0, n - k);
    const auto pool = pool_of(n);
    const SplitSpec spec{k, gen.integer(1, 6), static_cast<std::uint64_t>(gen.engine()()), v, false};
    for (const auto& s : sample_splits(pool, spec)) {
      std::set<std::string> train(s.train.begin(), s.train.end()), val(s.val.begin(), s.val.end());
      ASSERT_EQ(train.size(), static_cast<std::size_t>(k));
      ASSERT_EQ(val.size(), static_cast<std::size_t>(v));
      for (const auto& id : train) ASSERT_FALSE(val.contains(id));
    }
  }
}

TEST(Splits, PerClass) {
  std::vector<std::pair<std::string, std::vector<std::string>>> pool;
  for (int i = 0; i < 40; ++i) pool.push_back({"r" + std::to_string(i), {i % 2 ? "on" : "near"}});
  auto splits = sample_splits_per_class(pool, {3, 2, 5, 4, true});
  for (const auto& s : splits) {
    int on = 0, near = 0;
    for (const auto& id : s.train) (std::stoi(id.substr(1)) % 2 ? on : near)++;
    EXPECT_EQ(on, 3);
    EXPECT_EQ(near, 3);
    for (const auto& id : s.val) EXPECT_EQ(std::count(s.train.begin(), s.train.end(), id), 0);
  }
  EXPECT_CPT_ERROR(sample_splits_per_class(pool, {30, 1, 5, 0, true}), ErrorKind::kPoolTooSmall);
}

TEST(SplitMix, KnownSequence) {
  // Reference outputs of SplitMix64 seeded with state 0.
  SplitMix64 rng(0);
  EXPECT_EQ(rng.next(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(rng.next(), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(rng.next(), 0x06C45D188009454FULL);
}

TEST(Aggregate, ClosedForms) {
  auto r = aggregate({{{"acc", 10.0}}, {{"acc", 20.0}}});
  EXPECT_EQ(r.mean.at("acc"), 15.0);
  EXPECT_NEAR(r.std.at("acc"), 7.0710678118654755, 1e-12);
  EXPECT_EQ(aggregate({{{"acc", 3.0}}}).std.at("acc"), 0.0);
  auto five = aggregate(std::vector<MetricMap>(5, {{"acc", 0.7}}));
  EXPECT_EQ(five.std.at("acc"), 0.0);
  EXPECT_EQ(five.per_split.size(), 5u);
  EXPECT_CPT_ERROR(aggregate({}), ErrorKind::kInvalidArgument);
  EXPECT_CPT_ERROR(aggregate({{{"a", 1.0}}, {{"b", 1.0}}}), ErrorKind::kValidation);
  EXPECT_EQ(to_json(r).dump(), R"({"per_split":[{"acc":10.0},{"acc":20.0}],"mean":{"acc":15.0},"std":{"acc":7.0710678118654755}})");
}

}  // namespace
}  // namespace cpt
