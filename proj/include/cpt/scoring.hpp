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

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cpt/batching.hpp"
#include "cpt/colorspec.hpp"
#include "cpt/error.hpp"
#include "cpt/prompt.hpp"

namespace cpt {

using LogProbMap = std::map<std::string, double>;

// Candidate-restricted log-probabilities, one map per mask slot.
class MaskDistribution {
 public:
  static constexpr double kTolerance = 1e-9;

  explicit MaskDistribution(std::vector<LogProbMap> slots, double tolerance = kTolerance)
      : slots_(std::move(slots)) {
    if (slots_.empty()) throw Error(ErrorKind::kInvalidArgument, "distribution has no slots");
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      if (slots_[i].empty()) throw Error(ErrorKind::kInvalidArgument, "slot has no candidates");
      double total = 0.0;
      for (const auto& [label, lp] : slots_[i]) {
        if (std::isnan(lp) || lp > 0.0) {
          throw Error(ErrorKind::kValidation, "slot " + std::to_string(i) + " has invalid log-probability for '" + label + "'");
        }
        total += std::exp(lp);
      }
      if (std::abs(total - 1.0) > tolerance) {
        throw Error(ErrorKind::kValidation, "slot " + std::to_string(i) + " probabilities sum to " +
                                                std::to_string(total));
      }
    }
  }

  std::size_t slot_count() const noexcept { return slots_.size(); }
  const LogProbMap& slot(std::size_t i) const { return slots_.at(i); }
  const std::vector<LogProbMap>& slots() const noexcept { return slots_; }

  double log_prob(std::size_t slot_index, const std::string& label) const {
    const auto& s = slot(slot_index);
    auto it = s.find(label);
    if (it == s.end()) {
      throw Error(ErrorKind::kTokenNotCandidate, "'" + label + "' is not a candidate of slot " +
                                                     std::to_string(slot_index));
    }
    return it->second;
  }
  double prob(std::size_t slot_index, const std::string& label) const {
    return std::exp(log_prob(slot_index, label));
  }

  std::set<std::string> labels(std::size_t slot_index) const {
    std::set<std::string> out;
    for (const auto& [k, v] : slot(slot_index)) out.insert(k);
    return out;
  }

  friend bool operator==(const MaskDistribution&, const MaskDistribution&) = default;

 private:
  std::vector<LogProbMap> slots_;
};

// Log-softmax of one slot with max-subtraction.
inline LogProbMap log_softmax(const std::map<std::string, double>& logits) {
  if (logits.empty()) throw Error(ErrorKind::kInvalidArgument, "softmax needs at least one candidate");
  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& [label, z] : logits) {
    if (!std::isfinite(z)) throw Error(ErrorKind::kNonFiniteLogit, "logit for '" + label + "' is not finite");
    mx = std::max(mx, z);
  }
  double sum = 0.0;
  for (const auto& [label, z] : logits) sum += std::exp(z - mx);
  const double lse = std::log(sum);
  LogProbMap out;
  for (const auto& [label, z] : logits) out[label] = (z - mx) - lse;
  return out;
}

inline MaskDistribution normalize(const std::map<std::string, double>& logits) {
  return MaskDistribution({log_softmax(logits)});
}

// Re-centers externally produced log-probabilities so each slot sums to one
// to machine precision; the input must already be normalized within
// `tolerance`.
inline MaskDistribution renormalized(const std::vector<LogProbMap>& slots, double tolerance) {
  MaskDistribution checked(slots, tolerance);
  std::vector<LogProbMap> out;
  for (const auto& s : checked.slots()) {
    double sum = 0.0;
    for (const auto& [k, lp] : s) sum += std::exp(lp);
    const double shift = std::log(sum);
    LogProbMap fixed;
    for (const auto& [k, lp] : s) fixed[k] = lp - shift;
    out.push_back(std::move(fixed));
  }
  return MaskDistribution(std::move(out));
}

// ---------------------------------------------------------------------------
// Grounding

struct GroundingResult {
  std::map<std::size_t, double> per_region_prob;
  std::map<std::size_t, double> per_region_logprob;
  // Argmax over regions that beat their batch's "none"; empty if none does.
  std::optional<std::size_t> predicted;
  // Argmax over all regions; the fallback used for accuracy when `predicted`
  // is empty.
  std::size_t best_region = 0;
  std::vector<MaskDistribution> per_batch;

  std::size_t effective_prediction() const { return predicted.value_or(best_region); }
};

// Each batch distribution must offer exactly the batch's assigned color texts
// plus "none". A region's probability is its color's in-batch probability;
// batches are compared on these raw values without cross-batch calibration.
inline GroundingResult decode_grounding(const BatchPlan& plan, const ColorSet& colors,
                                        const std::vector<MaskDistribution>& batch_dists) {
  if (batch_dists.size() != plan.batches.size()) {
    throw Error(ErrorKind::kCandidateMismatch, "expected " + std::to_string(plan.batches.size()) +
                                                   " batch distributions, got " +
                                                   std::to_string(batch_dists.size()));
  }
  GroundingResult res;
  std::optional<std::pair<double, std::size_t>> best_qualified;
  std::optional<std::pair<double, std::size_t>> best_any;
  auto better = [](const std::optional<std::pair<double, std::size_t>>& cur, double p, std::size_t idx) {
    return !cur || p > cur->first || (p == cur->first && idx < cur->second);
  };
  for (std::size_t b = 0; b < plan.batches.size(); ++b) {
    const auto& batch = plan.batches[b];
    const auto& dist = batch_dists[b];
    if (batch.members.size() > colors.size()) {
      throw Error(ErrorKind::kCandidateMismatch, "batch larger than the color set");
    }
    std::set<std::string> expected{kNoneLabel};
    for (std::size_t i = 0; i < batch.members.size(); ++i) expected.insert(colors[i].text.str());
    if (dist.slot_count() != 1 || dist.labels(0) != expected) {
      throw Error(ErrorKind::kCandidateMismatch, "batch " + std::to_string(b) +
                                                     " distribution does not match its assigned colors plus 'none'");
    }
    const double none_lp = dist.log_prob(0, kNoneLabel);
    for (std::size_t i = 0; i < batch.members.size(); ++i) {
      const auto region = batch.members[i];
      const double lp = dist.log_prob(0, colors[i].text.str());
      res.per_region_logprob[region] = lp;
      res.per_region_prob[region] = std::exp(lp);
      if (better(best_any, lp, region)) best_any = {lp, region};
      if (lp > none_lp && better(best_qualified, lp, region)) best_qualified = {lp, region};
    }
    res.per_batch.push_back(dist);
  }
  if (best_qualified) res.predicted = best_qualified->second;
  if (best_any) res.best_region = best_any->second;
  return res;
}

struct LossReport {
  double total_nll = 0.0;
  std::vector<double> per_instance;

  // Shards computed concurrently merge by concatenation.
  void merge(const LossReport& other) {
    total_nll += other.total_nll;
    per_instance.insert(per_instance.end(), other.per_instance.begin(), other.per_instance.end());
  }
};

// Sum over instances of -log P(gold region).
inline LossReport grounding_nll(const std::vector<std::pair<GroundingResult, std::size_t>>& results) {
  LossReport rep;
  for (const auto& [res, gold] : results) {
    auto it = res.per_region_logprob.find(gold);
    if (it == res.per_region_logprob.end()) {
      throw Error(ErrorKind::kGoldMissing, "gold region " + std::to_string(gold) + " has no probability");
    }
    const double term = it->second == 0.0 ? 0.0 : -it->second;
    rep.per_instance.push_back(term);
    rep.total_nll += term;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Relations

struct RelationVocabEntry {
  std::string label;
  std::vector<std::string> tokens;
};

inline std::vector<RelationVocabEntry> make_relation_vocab(const std::vector<std::string>& labels) {
  std::vector<RelationVocabEntry> out;
  std::set<std::string> seen;
  for (const auto& l : labels) {
    if (!seen.insert(l).second) continue;
    auto tokens = split_words(l);
    if (tokens.empty()) throw Error(ErrorKind::kEmptyText, "relation label is empty");
    out.push_back({l, std::move(tokens)});
  }
  return out;
}

struct RelationScoreTable {
  std::map<std::string, double> scores;
  // Descending score, ties by label; NA placeholders never appear here.
  std::vector<std::string> ranked;
  std::map<int, double> na_scores;
};

namespace detail {

inline double mean_token_logprob(const MaskDistribution& dist, const std::vector<std::string>& tokens) {
  double sum = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i) sum += dist.log_prob(i, tokens[i]);
  return sum / static_cast<double>(tokens.size());
}

inline bool all_candidates(const MaskDistribution& dist, const std::vector<std::string>& tokens) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!dist.slot(i).contains(tokens[i])) return false;
  }
  return true;
}

}  // namespace detail

// s(r) = mean over i of log P(mask_i = r_i) under the template with l = |r|.
inline RelationScoreTable score_relations(const std::map<int, MaskDistribution>& dists_by_l,
                                          const std::vector<RelationVocabEntry>& vocab) {
  RelationScoreTable table;
  std::set<std::string> na_labels;
  for (const auto& [l, dist] : dists_by_l) {
    if (static_cast<int>(dist.slot_count()) != l) {
      throw Error(ErrorKind::kCandidateMismatch, "distribution for l=" + std::to_string(l) + " has " +
                                                     std::to_string(dist.slot_count()) + " slots");
    }
    const auto na = na_relation(l);
    na_labels.insert(na.label);
    if (detail::all_candidates(dist, na.tokens)) {
      table.na_scores[l] = detail::mean_token_logprob(dist, na.tokens);
    }
  }
  for (const auto& entry : vocab) {
    if (na_labels.contains(entry.label)) continue;
    const int l = static_cast<int>(entry.tokens.size());
    auto it = dists_by_l.find(l);
    if (it == dists_by_l.end()) {
      throw Error(ErrorKind::kMissingTemplate, "no l=" + std::to_string(l) + " distribution for '" + entry.label + "'");
    }
    table.scores[entry.label] = detail::mean_token_logprob(it->second, entry.tokens);
  }
  for (const auto& [label, s] : table.scores) table.ranked.push_back(label);
  std::stable_sort(table.ranked.begin(), table.ranked.end(), [&](const auto& a, const auto& b) {
    return table.scores.at(a) > table.scores.at(b);
  });
  return table;
}

// Training targets for the l-mask template: the relation's own tokens when
// its length is l, the NA placeholder otherwise (and for pairs with no
// relation at all).
inline std::vector<std::string> relation_training_targets(
    const std::optional<std::vector<std::string>>& relation_tokens, int l) {
  const auto na = na_relation(l);
  if (relation_tokens && static_cast<int>(relation_tokens->size()) == l) return *relation_tokens;
  return na.tokens;
}

}  // namespace cpt
