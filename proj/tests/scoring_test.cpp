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


#include <cmath>

#include "cpt/scoring.hpp"
#include "properties.hpp"
#include "test_util.hpp"

namespace cpt {
namespace {

// A slot where `label` has log-probability lp and one filler takes the rest.
LogProbMap slot_with(const std::string& label, double lp, const std::string& filler = "other") {
  return {{label, lp}, {filler, std::log1p(-std::exp(lp))}};
}

TEST(Softmax, ClosedForms) {
  auto d = normalize({{"red", 0.0}, {"blue", 0.0}});
  EXPECT_DOUBLE_EQ(d.prob(0, "red"), 0.5);
  EXPECT_DOUBLE_EQ(d.prob(0, "blue"), 0.5);
  auto e = normalize({{"red", 0.0}, {"blue", std::log(2.0)}});
  EXPECT_NEAR(e.prob(0, "red"), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(e.prob(0, "blue"), 2.0 / 3.0, 1e-15);
  auto f = normalize({{"red", 1000.0}, {"blue", 0.0}});
  EXPECT_DOUBLE_EQ(f.prob(0, "red"), 1.0);
  EXPECT_TRUE(std::isfinite(f.log_prob(0, "blue")));
}

TEST(Softmax, Errors) {
  EXPECT_CPT_ERROR(normalize({{"red", NAN}}), ErrorKind::kNonFiniteLogit);
  EXPECT_CPT_ERROR(normalize({{"red", INFINITY}}), ErrorKind::kNonFiniteLogit);
  EXPECT_CPT_ERROR(normalize({{"red", 0.0}}).log_prob(0, "blue"), ErrorKind::kTokenNotCandidate);
  EXPECT_CPT_ERROR(MaskDistribution({{{"a", std::log(0.5)}}}), ErrorKind::kValidation);
}

TEST(Softmax, RandomInvariants) {
  auto f = props::run_softmax_invariants(1000, 99);
  EXPECT_EQ(f.normalization, 0);
  EXPECT_EQ(f.shift, 0);
  EXPECT_EQ(f.argmax, 0);
}

MaskDistribution probs(std::map<std::string, double> p) {
  LogProbMap lp;
  for (auto& [k, v] : p) lp[k] = std::log(v);
  return MaskDistribution({lp});
}

ColorSet red_blue() { return ColorSet({{{255, 0, 0}, ColorText("red")}, {{0, 0, 255}, ColorText("blue")}}); }

TEST(DecodeGrounding, DirectArgmax) {
  BatchPlan plan;
  plan.batches = {RegionBatch{{0, 1}}};
  auto res = decode_grounding(plan, red_blue(), {probs({{"red", 0.7}, {"blue", 0.2}, {"none", 0.1}})});
  ASSERT_TRUE(res.predicted);
  EXPECT_EQ(*res.predicted, 0u);
  EXPECT_NEAR(res.per_region_prob[1], 0.2, 1e-15);
}

TEST(DecodeGrounding, NoneDominates) {
  BatchPlan plan;
  plan.batches = {RegionBatch{{0, 1}}};
  auto res = decode_grounding(plan, red_blue(), {probs({{"red", 0.1}, {"blue", 0.2}, {"none", 0.7}})});
  EXPECT_FALSE(res.predicted);
  EXPECT_EQ(res.best_region, 1u);
  EXPECT_EQ(res.effective_prediction(), 1u);
}

TEST(DecodeGrounding, AcrossBatches) {
  BatchPlan plan;
  plan.batches = {RegionBatch{{0}}, RegionBatch{{1}}};
  auto res = decode_grounding(plan, red_blue(),
                              {probs({{"red", 0.3}, {"none", 0.7}}), probs({{"red", 0.6}, {"none", 0.4}})});
  ASSERT_TRUE(res.predicted);
  EXPECT_EQ(*res.predicted, 1u);
}

TEST(DecodeGrounding, QualifiedBeatsHigherUnqualified) {
  // Region 0 has 0.45 but loses to its batch's none; region 1 has 0.4 and
  // beats its batch's none.
  BatchPlan plan;
  plan.batches = {RegionBatch{{0}}, RegionBatch{{1, 2}}};
  auto res = decode_grounding(plan, red_blue(),
                              {probs({{"red", 0.45}, {"none", 0.55}}),
                               probs({{"red", 0.4}, {"blue", 0.3}, {"none", 0.3}})});
  ASSERT_TRUE(res.predicted);
  EXPECT_EQ(*res.predicted, 1u);
  EXPECT_EQ(res.best_region, 0u);
}

TEST(DecodeGrounding, Mismatch) {
  BatchPlan plan;
  plan.batches = {RegionBatch{{0}}};
  EXPECT_CPT_ERROR(decode_grounding(plan, red_blue(), {}), ErrorKind::kCandidateMismatch);
  EXPECT_CPT_ERROR(decode_grounding(plan, red_blue(), {probs({{"blue", 0.5}, {"none", 0.5}})}),
                   ErrorKind::kCandidateMismatch);
}

TEST(DecodeGrounding, ArgmaxInvariantUnderAffineLogits) {
  testing::Gen gen(31);
  const auto colors = preset_cps_colors();
  for (int i = 0; i < 300; ++i) {
    const int n = gen.integer(1, 6);
    BatchPlan plan;
    RegionBatch b;
    for (int k = 0; k < n; ++k) b.members.push_back(static_cast<std::size_t>(k));
    plan.batches = {b};
    std::map<std::string, double> z{{"none", gen.real(-5, 5)}};
    for (int k = 0; k < n; ++k) z[colors[static_cast<std::size_t>(k)].text.str()] = gen.real(-5, 5);
    auto affine = z;
    const double a = gen.real(0.1, 10), c = gen.real(-50, 50);
    for (auto& [k, v] : affine) v = a * v + c;
    auto r1 = decode_grounding(plan, colors, {normalize(z)});
    auto r2 = decode_grounding(plan, colors, {normalize(affine)});
    ASSERT_EQ(r1.predicted, r2.predicted);
    ASSERT_EQ(r1.best_region, r2.best_region);
  }
}

GroundingResult with_gold_prob(double lp) {
  GroundingResult r;
  r.per_region_logprob[0] = lp;
  r.per_region_prob[0] = std::exp(lp);
  return r;
}

TEST(GroundingNll, ClosedForms) {
  EXPECT_EQ(grounding_nll({{with_gold_prob(0.0), 0}}).total_nll, 0.0);
  EXPECT_EQ(grounding_nll({{with_gold_prob(-1.0), 0}}).total_nll, 1.0);
  auto rep = grounding_nll({{with_gold_prob(-1.0), 0}, {with_gold_prob(-2.0), 0}});
  EXPECT_EQ(rep.total_nll, 3.0);
  EXPECT_EQ(rep.per_instance, (std::vector<double>{1.0, 2.0}));
  EXPECT_CPT_ERROR(grounding_nll({{with_gold_prob(-1.0), 4}}), ErrorKind::kGoldMissing);
  LossReport a = grounding_nll({{with_gold_prob(-1.0), 0}});
  a.merge(grounding_nll({{with_gold_prob(-2.0), 0}}));
  EXPECT_EQ(a.total_nll, 3.0);
}

TEST(RelationScores, HandComputedMeans) {
  const double a = -0.2, b = -0.4, c1 = -0.05, c2 = -1.3, c3 = -0.7;
  std::map<int, MaskDistribution> dists;
  dists.emplace(1, MaskDistribution({slot_with("wearing", a, "irrelevant")}));
  dists.emplace(2, MaskDistribution({slot_with("walking", a, "no"), slot_with("on", b, "relation")}));
  dists.emplace(3, MaskDistribution({slot_with("parked", c1, "no"), slot_with("next", c2, "relation"),
                                     slot_with("to", c3, "with")}));
  auto vocab = make_relation_vocab({"wearing", "walking on", "parked next to"});
  auto t = score_relations(dists, vocab);
  EXPECT_EQ(t.scores.at("wearing"), a);
  EXPECT_EQ(t.scores.at("walking on"), (a + b) / 2.0);
  EXPECT_DOUBLE_EQ(t.scores.at("walking on"), -0.3);
  EXPECT_EQ(t.scores.at("parked next to"), (c1 + c2 + c3) / 3.0);
  EXPECT_EQ(t.ranked, (std::vector<std::string>{"wearing", "walking on", "parked next to"}));
}

TEST(RelationScores, RankingAndNaExclusion) {
  std::map<int, MaskDistribution> dists;
  dists.emplace(1, MaskDistribution({{{"a", std::log(0.5)}, {"b", std::log(0.2)}, {"irrelevant", std::log(0.3)}}}));
  auto t = score_relations(dists, make_relation_vocab({"b", "a", "irrelevant"}));
  EXPECT_EQ(t.ranked, (std::vector<std::string>{"a", "b"}));
  EXPECT_FALSE(t.scores.contains("irrelevant"));
  EXPECT_EQ(t.na_scores.at(1), std::log(0.3));
}

TEST(RelationScores, MissingTemplate) {
  std::map<int, MaskDistribution> dists;
  dists.emplace(1, MaskDistribution({{{"a", 0.0}}}));
  EXPECT_CPT_ERROR(score_relations(dists, make_relation_vocab({"walking on"})), ErrorKind::kMissingTemplate);
}

TEST(RelationTargets, NaForOtherLengths) {
  EXPECT_EQ(relation_training_targets(std::vector<std::string>{"on"}, 1), (std::vector<std::string>{"on"}));
  EXPECT_EQ(relation_training_targets(std::vector<std::string>{"on"}, 2),
            (std::vector<std::string>{"no", "relation"}));
  EXPECT_EQ(relation_training_targets(std::nullopt, 3), (std::vector<std::string>{"no", "relation", "with"}));
}

}  // namespace
}  // namespace cpt
