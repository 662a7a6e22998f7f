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


// Property checks and independent oracles shared by the unit tests and the
// acceptance binary. Nothing here depends on a test framework: each check
// returns a failure description (empty on success) or a failure count.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cpt/batching.hpp"
#include "cpt/evalkit.hpp"
#include "cpt/scoring.hpp"

namespace cpt::props {

// ---------------------------------------------------------------------------
// Softmax

struct NumericFailures {
  int normalization = 0;
  int shift = 0;
  int argmax = 0;
};

inline std::size_t argmax_index(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

inline std::vector<double> probs_in_order(const std::map<std::string, double>& logits) {
  std::vector<double> out;
  for (const auto& [k, lp] : log_softmax(logits)) out.push_back(std::exp(lp));
  return out;
}

// `cases` random logit vectors (2..12 entries, magnitudes up to 50) each for
// normalization within 1e-9, invariance of probabilities under z + c within
// 1e-12, and argmax invariance under a*z + b with a > 0.
inline NumericFailures run_softmax_invariants(int cases, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> logit(-50.0, 50.0), shift(-100.0, 100.0), scale(0.01, 100.0);
  std::uniform_int_distribution<int> size(2, 12);
  NumericFailures f;
  auto make = [&] {
    std::map<std::string, double> z;
    const int n = size(eng);
    for (int i = 0; i < n; ++i) z["c" + std::to_string(100 + i)] = logit(eng);
    return z;
  };
  for (int i = 0; i < cases; ++i) {
    const auto z = make();
    double total = 0.0;
    for (double p : probs_in_order(z)) total += p;
    if (std::abs(total - 1.0) > 1e-9) ++f.normalization;
  }
  for (int i = 0; i < cases; ++i) {
    const auto z = make();
    const double c = shift(eng);
    auto shifted = z;
    for (auto& [k, v] : shifted) v += c;
    const auto a = probs_in_order(z), b = probs_in_order(shifted);
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (std::abs(a[k] - b[k]) > 1e-12) {
        ++f.shift;
        break;
      }
    }
  }
  for (int i = 0; i < cases; ++i) {
    const auto z = make();
    const double a = scale(eng), b = shift(eng);
    auto affine = z;
    for (auto& [k, v] : affine) v = a * v + b;
    std::vector<double> raw;
    for (const auto& [k, v] : z) raw.push_back(v);
    const auto p = probs_in_order(affine);
    if (argmax_index(raw) != argmax_index(p) || argmax_index(probs_in_order(z)) != argmax_index(p)) ++f.argmax;
  }
  return f;
}

// ---------------------------------------------------------------------------
// Batching

// Partition, capacity and overlap invariants of one plan.
inline std::string check_plan(const std::vector<BoundingBox>& boxes, std::size_t capacity, double threshold,
                              const BatchPlan& plan) {
  std::vector<int> seen(boxes.size(), 0);
  for (std::size_t b = 0; b < plan.batches.size(); ++b) {
    const auto& m = plan.batches[b].members;
    if (m.empty()) return "batch " + std::to_string(b) + " is empty";
    if (m.size() > capacity) return "batch " + std::to_string(b) + " exceeds capacity";
    for (auto i : m) {
      if (i >= boxes.size()) return "member index out of range";
      ++seen[i];
    }
    for (std::size_t x = 0; x < m.size(); ++x) {
      for (std::size_t y = x + 1; y < m.size(); ++y) {
        if (iou(boxes[m[x]], boxes[m[y]]) >= threshold) {
          return "batch " + std::to_string(b) + " co-batches overlapping proposals";
        }
      }
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i] != 1) return "proposal " + std::to_string(i) + " appears " + std::to_string(seen[i]) + " times";
  }
  return {};
}

struct BatchingFailures {
  int partition_capacity_overlap = 0;
  int determinism = 0;
  std::string first;
};

// Random proposal sets (1..40 boxes on a 64x64 canvas, fractional corners,
// with duplicated boxes mixed in), random capacity 1..8 and threshold.
inline BatchingFailures run_batching_properties(int cases, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_int_distribution<int> count(1, 40), cap(1, 8), coin(0, 4);
  std::uniform_real_distribution<double> pos(0.0, 56.0), side(0.5, 30.0), thr(0.05, 1.0);
  BatchingFailures f;
  for (int i = 0; i < cases; ++i) {
    std::vector<BoundingBox> boxes;
    const int n = count(eng);
    for (int k = 0; k < n; ++k) {
      if (!boxes.empty() && coin(eng) == 0) {
        boxes.push_back(boxes[std::uniform_int_distribution<std::size_t>(0, boxes.size() - 1)(eng)]);
      } else {
        boxes.push_back({pos(eng), pos(eng), side(eng), side(eng)});
      }
    }
    const auto capacity = static_cast<std::size_t>(cap(eng));
    const double threshold = thr(eng);
    const auto plan = plan_batches(boxes, capacity, threshold);
    auto err = check_plan(boxes, capacity, threshold, plan);
    if (!err.empty()) {
      ++f.partition_capacity_overlap;
      if (f.first.empty()) f.first = err;
    }
    if (!(plan_batches(boxes, capacity, threshold) == plan)) ++f.determinism;
  }
  return f;
}

// ---------------------------------------------------------------------------
// Relation recall brute force

// Three images, ten gold-or-ranked triplets in total, with a tie-free ranking.
inline std::vector<RankedImage> toy_vrd_corpus() {
  auto t = [](const char* s, const char* r, const char* o) { return Triplet{s, r, o}; };
  std::vector<RankedImage> c(3);
  c[0].ranked = {t("man", "on", "horse"), t("man", "near", "dog"), t("dog", "on", "grass"),
                 t("man", "wearing", "hat")};
  c[0].gold = {t("man", "wearing", "hat"), t("man", "on", "horse")};
  c[1].ranked = {t("cup", "on", "table"), t("table", "near", "chair"), t("cup", "near", "plate")};
  c[1].gold = {t("table", "near", "chair"), t("cup", "near", "plate")};
  c[2].ranked = {t("girl", "wearing", "shirt"), t("girl", "on", "bike"), t("bike", "near", "tree")};
  c[2].gold = {t("bike", "near", "tree"), t("girl", "on", "bike")};
  return c;
}

// Rank position of a gold triplet by linear scan; npos if absent.
inline std::size_t rank_of(const RankedImage& img, const Triplet& g) {
  for (std::size_t i = 0; i < img.ranked.size(); ++i) {
    if (img.ranked[i] == g) return i;
  }
  return std::string::npos;
}

inline double brute_recall(const std::vector<RankedImage>& images, std::size_t n) {
  long hit = 0, total = 0;
  for (const auto& img : images) {
    for (const auto& g : img.gold) {
      ++total;
      if (rank_of(img, g) < n) ++hit;
    }
  }
  return total ? double(hit) / double(total) : 0.0;
}

inline double brute_mean_recall(const std::vector<RankedImage>& images, std::size_t n) {
  std::set<std::string> labels;
  for (const auto& img : images) {
    for (const auto& g : img.gold) labels.insert(g.relation);
  }
  double sum = 0.0;
  for (const auto& label : labels) {
    long hit = 0, total = 0;
    for (const auto& img : images) {
      for (const auto& g : img.gold) {
        if (g.relation != label) continue;
        ++total;
        if (rank_of(img, g) < n) ++hit;
      }
    }
    sum += double(hit) / double(total);
  }
  return labels.empty() ? 0.0 : sum / double(labels.size());
}

}  // namespace cpt::props
