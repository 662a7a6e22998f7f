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

#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cpt/backend.hpp"
#include "cpt/batching.hpp"
#include "cpt/colorspec.hpp"
#include "cpt/prompt.hpp"
#include "cpt/raster.hpp"
#include "cpt/scoring.hpp"

namespace cpt {

struct GroundingConfig {
  ColorSet colors = preset_default_color();
  double alpha = 0.5;
  // 0 means "use the color set size".
  std::size_t capacity = 0;
  double overlap_threshold = 0.5;
  PromptShape shape = PromptShape::kBlock;

  std::size_t effective_capacity() const { return capacity == 0 ? colors.size() : capacity; }

  void validate() const {
    (void)Transparency{alpha};
    colors.require_no_reserved_label();
    if (effective_capacity() > colors.size()) {
      throw Error(ErrorKind::kValidation, "batch capacity " + std::to_string(effective_capacity()) +
                                              " exceeds color set size " + std::to_string(colors.size()));
    }
  }
};

struct RegionInput {
  BoundingBox box;
  std::optional<SegmentMask> mask;
};

// One colorized image per batch; member i of a batch wears colors[i].
inline std::vector<RasterImage> colorize_batches(const RasterImage& image, const std::vector<RegionInput>& regions,
                                                 const BatchPlan& plan, const GroundingConfig& config) {
  std::vector<RasterImage> out;
  for (const auto& batch : plan.batches) {
    std::vector<RegionAssignment> assignments;
    for (std::size_t i = 0; i < batch.members.size(); ++i) {
      const auto& r = regions.at(batch.members[i]);
      assignments.push_back({r.box, r.mask, config.colors[i]});
    }
    out.push_back(apply_visual_subprompt(image, assignments, Transparency{config.alpha}, config.shape));
  }
  return out;
}

inline std::vector<CandidateTokenSeq> grounding_candidates(const ColorSet& colors, std::size_t n) {
  std::vector<CandidateTokenSeq> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({{colors[i].text.str()}, colors[i].text.str()});
  out.push_back({{kNoneLabel}, kNoneLabel});
  return out;
}

struct GroundingRun {
  BatchPlan plan;
  GroundingResult result;
};

// Batches the proposals, colors each batch, asks the backend to fill the
// grounding template's mask with one of the batch's colors or "none", and
// decodes the batch distributions into a region prediction.
inline GroundingRun ground_image(ScoringBackend& backend, const RasterImage& image,
                                 const std::vector<RegionInput>& regions, const std::string& query,
                                 const GroundingConfig& config, const Meta& base_meta = {}) {
  config.validate();
  std::vector<BoundingBox> boxes;
  for (const auto& r : regions) boxes.push_back(r.box);
  GroundingRun run{plan_batches(boxes, config.effective_capacity(), config.overlap_threshold), {}};
  const auto prompt = grounding_template(query).rendered();
  const auto images = colorize_batches(image, regions, run.plan, config);
  std::vector<MaskDistribution> dists;
  for (std::size_t b = 0; b < run.plan.batches.size(); ++b) {
    ScoreRequest req{images[b], prompt, 1,
                     {grounding_candidates(config.colors, run.plan.batches[b].members.size())}, base_meta};
    req.meta["alpha"] = format_double(config.alpha);
    req.meta["task"] = "grounding";
    req.meta["batch"] = std::to_string(b);
    dists.push_back(to_distribution(backend.score(req)));
  }
  run.result = decode_grounding(run.plan, config.colors, dists);
  return run;
}

// ---------------------------------------------------------------------------
// Relations

struct RelationConfig {
  ColorSet colors = preset_cps_colors();
  double alpha = 0.5;
};

// Per-slot candidates for the l-mask template: the i-th tokens of every
// length-l relation (first occurrence order) plus the NA placeholder's token.
inline std::vector<std::vector<CandidateTokenSeq>> relation_slot_candidates(
    const std::vector<RelationVocabEntry>& vocab, int l) {
  const auto na = na_relation(l);
  std::vector<std::vector<CandidateTokenSeq>> slots(static_cast<std::size_t>(l));
  std::vector<std::set<std::string>> seen(static_cast<std::size_t>(l));
  auto add = [&](std::size_t i, const std::string& tok) {
    if (seen[i].insert(tok).second) slots[i].push_back({{tok}, tok});
  };
  for (const auto& e : vocab) {
    if (static_cast<int>(e.tokens.size()) != l) continue;
    for (std::size_t i = 0; i < e.tokens.size(); ++i) add(i, e.tokens[i]);
  }
  for (std::size_t i = 0; i < na.tokens.size(); ++i) add(i, na.tokens[i]);
  return slots;
}

// Colors subject and object with the first two colors, runs one template per
// relation length present in the vocabulary, and scores every relation.
inline RelationScoreTable score_relation_pair(ScoringBackend& backend, const RasterImage& image,
                                              const std::string& subject_text, const BoundingBox& subject_box,
                                              const std::string& object_text, const BoundingBox& object_box,
                                              const std::vector<RelationVocabEntry>& vocab,
                                              const RelationConfig& config, const Meta& base_meta = {}) {
  if (config.colors.size() < 2) throw Error(ErrorKind::kValidation, "relation prompts need at least two colors");
  if (vocab.empty()) throw Error(ErrorKind::kValidation, "relation vocabulary is empty");
  std::set<int> lengths;
  for (const auto& e : vocab) {
    const int l = static_cast<int>(e.tokens.size());
    if (l < 1 || l > 3) throw Error(ErrorKind::kBadMaskCount, "relation '" + e.label + "' has " + std::to_string(l) + " tokens");
    lengths.insert(l);
  }
  std::vector<RegionAssignment> assignments{{subject_box, std::nullopt, config.colors[0]},
                                            {object_box, std::nullopt, config.colors[1]}};
  const auto colored = apply_visual_subprompt(image, assignments, Transparency{config.alpha}, PromptShape::kBlock);
  std::map<int, MaskDistribution> dists;
  for (int l : lengths) {
    const auto prompt = relation_template(subject_text, config.colors[0].text, object_text, config.colors[1].text, l);
    ScoreRequest req{colored, prompt.rendered(), l, relation_slot_candidates(vocab, l), base_meta};
    req.meta["alpha"] = format_double(config.alpha);
    req.meta["task"] = "relation";
    req.meta["mask_count"] = std::to_string(l);
    dists.emplace(l, to_distribution(backend.score(req)));
  }
  return score_relations(dists, vocab);
}

}  // namespace cpt
