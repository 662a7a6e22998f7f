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
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cpt/error.hpp"
#include "cpt/raster.hpp"

namespace cpt {

// ---------------------------------------------------------------------------
// Geometry and grounding accuracy

inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

struct GroundingOutcome {
  std::optional<BoundingBox> predicted;
  BoundingBox gold;
};

// Correct iff a box was predicted and its IoU with gold is strictly greater
// than the threshold.
inline double grounding_accuracy(const std::vector<GroundingOutcome>& preds, double threshold = 0.5) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "accuracy threshold must lie in (0,1]");
  }
  if (preds.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& p : preds) {
    if (p.predicted && iou(*p.predicted, p.gold) > threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

// ---------------------------------------------------------------------------
// Relation recall

struct Triplet {
  std::string subject;
  std::string relation;
  std::string object;

  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

// One image: triplets ranked best-first, plus the gold set.
struct RankedImage {
  std::vector<Triplet> ranked;
  std::set<Triplet> gold;
};

namespace detail {

inline std::set<Triplet> top_n(const RankedImage& img, std::size_t n) {
  std::set<Triplet> out;
  for (std::size_t i = 0; i < img.ranked.size() && i < n; ++i) out.insert(img.ranked[i]);
  return out;
}

inline void check_n(std::size_t n) {
  if (n < 1) throw Error(ErrorKind::kInvalidArgument, "recall@N needs N >= 1");
}

}  // namespace detail

// Micro recall: gold triplets found in each image's top-n, over all gold.
inline double recall_at_n(const std::vector<RankedImage>& images, std::size_t n) {
  detail::check_n(n);
  std::size_t hit = 0, total = 0;
  for (const auto& img : images) {
    const auto top = detail::top_n(img, n);
    for (const auto& g : img.gold) hit += top.count(g);
    total += img.gold.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

// Unweighted mean over relation labels (with >= 1 gold triplet) of the recall
// restricted to that label's gold triplets.
inline double mean_recall_at_n(const std::vector<RankedImage>& images, std::size_t n) {
  detail::check_n(n);
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_label;  // hit, total
  for (const auto& img : images) {
    const auto top = detail::top_n(img, n);
    for (const auto& g : img.gold) {
      auto& [hit, total] = per_label[g.relation];
      hit += top.count(g);
      ++total;
    }
  }
  if (per_label.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [label, ht] : per_label) {
    sum += static_cast<double>(ht.first) / static_cast<double>(ht.second);
  }
  return sum / static_cast<double>(per_label.size());
}

// ---------------------------------------------------------------------------
// Seeded few-shot splits
//
// Generator: SplitMix64. Split i seeds state = seed + (i + 1) * 0x9E3779B97F4A7C15
// (mod 2^64). Each next() adds 0x9E3779B97F4A7C15 to the state and returns the
// standard SplitMix64 finalizer of the new state. Sampling without replacement
// is a partial Fisher-Yates shuffle of the pool positions: for j = 0,1,...
// swap position j with j + next() % (n - j). The first k_shots positions are
// the training ids, the next val_size the validation ids.

class SplitMix64 {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  std::uint64_t next() {
    state_ += kGamma;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t below(std::uint64_t bound) { return next() % bound; }

  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

inline SplitMix64 split_generator(std::uint64_t seed, std::size_t split_index) {
  return SplitMix64(seed + static_cast<std::uint64_t>(split_index + 1) * SplitMix64::kGamma);
}

struct SplitSpec {
  int k_shots = 0;
  int n_splits = 5;
  std::uint64_t seed = 0;
  int val_size = 16;
  // K per relation label instead of K total.
  bool per_class = false;
};

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> val;

  friend bool operator==(const Split&, const Split&) = default;
};

namespace detail {

inline void check_split_spec(const SplitSpec& spec) {
  if (spec.k_shots < 0 || spec.val_size < 0 || spec.n_splits < 1) {
    throw Error(ErrorKind::kInvalidArgument, "split spec needs k_shots >= 0, val_size >= 0, n_splits >= 1");
  }
}

// Draws `count` positions from `pos[from..)` in place; returns them.
inline std::vector<std::size_t> draw(std::vector<std::size_t>& pos, std::size_t from,
                                     std::size_t count, SplitMix64& rng) {
  std::vector<std::size_t> out;
  for (std::size_t j = from; j < from + count; ++j) {
    const std::size_t r = j + static_cast<std::size_t>(rng.below(pos.size() - j));
    std::swap(pos[j], pos[r]);
    out.push_back(pos[j]);
  }
  return out;
}

}  // namespace detail

inline std::vector<Split> sample_splits(const std::vector<std::string>& pool, const SplitSpec& spec) {
  detail::check_split_spec(spec);
  const auto need = static_cast<std::size_t>(spec.k_shots) + static_cast<std::size_t>(spec.val_size);
  if (need > pool.size()) {
    throw Error(ErrorKind::kPoolTooSmall, "pool of " + std::to_string(pool.size()) +
                                              " cannot supply " + std::to_string(need) + " ids");
  }
  std::vector<Split> splits;
  for (int i = 0; i < spec.n_splits; ++i) {
    auto rng = split_generator(spec.seed, static_cast<std::size_t>(i));
    std::vector<std::size_t> pos(pool.size());
    for (std::size_t j = 0; j < pos.size(); ++j) pos[j] = j;
    Split s;
    for (auto p : detail::draw(pos, 0, static_cast<std::size_t>(spec.k_shots), rng)) {
      s.train.push_back(pool[p]);
    }
    for (auto p : detail::draw(pos, static_cast<std::size_t>(spec.k_shots),
                               static_cast<std::size_t>(spec.val_size), rng)) {
      s.val.push_back(pool[p]);
    }
    splits.push_back(std::move(s));
  }
  return splits;
}

// K training ids per label. Labels are visited in lexicographic order, each
// drawing from its not-yet-chosen members with the split's generator; the
// validation ids are then drawn from the remaining pool.
inline std::vector<Split> sample_splits_per_class(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& pool_with_labels,
    const SplitSpec& spec) {
  detail::check_split_spec(spec);
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < pool_with_labels.size(); ++i) {
    for (const auto& label : pool_with_labels[i].second) members[label].push_back(i);
  }
  std::vector<Split> splits;
  for (int s = 0; s < spec.n_splits; ++s) {
    auto rng = split_generator(spec.seed, static_cast<std::size_t>(s));
    std::vector<bool> taken(pool_with_labels.size(), false);
    Split out;
    for (const auto& [label, idx] : members) {
      std::vector<std::size_t> avail;
      for (auto i : idx) {
        if (!taken[i]) avail.push_back(i);
      }
      if (avail.size() < static_cast<std::size_t>(spec.k_shots)) {
        throw Error(ErrorKind::kPoolTooSmall, "label '" + label + "' has only " +
                                                  std::to_string(avail.size()) + " free instances");
      }
      for (auto i : detail::draw(avail, 0, static_cast<std::size_t>(spec.k_shots), rng)) {
        taken[i] = true;
        out.train.push_back(pool_with_labels[i].first);
      }
    }
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < taken.size(); ++i) {
      if (!taken[i]) rest.push_back(i);
    }
    if (rest.size() < static_cast<std::size_t>(spec.val_size)) {
      throw Error(ErrorKind::kPoolTooSmall, "not enough instances left for validation");
    }
    for (auto i : detail::draw(rest, 0, static_cast<std::size_t>(spec.val_size), rng)) {
      out.val.push_back(pool_with_labels[i].first);
    }
    splits.push_back(std::move(out));
  }
  return splits;
}

// One line per split: `<index>\ttrain=<ids,>\tval=<ids,>`.
inline std::string format_splits(const std::vector<Split>& splits) {
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
  };
  std::string out;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    out += std::to_string(i) + "\ttrain=" + join(splits[i].train) + "\tval=" + join(splits[i].val) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Multi-split aggregation

using MetricMap = std::map<std::string, double>;

struct MetricReport {
  std::vector<MetricMap> per_split;
  MetricMap mean;
  MetricMap std;
};

// Mean and sample standard deviation (n-1 denominator, 0 for a single split).
inline MetricReport aggregate(const std::vector<MetricMap>& per_split) {
  if (per_split.empty()) throw Error(ErrorKind::kInvalidArgument, "aggregate needs at least one split");
  MetricReport rep;
  rep.per_split = per_split;
  for (const auto& [key, unused] : per_split.front()) {
    double sum = 0.0;
    for (const auto& m : per_split) {
      auto it = m.find(key);
      if (it == m.end()) throw Error(ErrorKind::kValidation, "split is missing metric '" + key + "'");
      sum += it->second;
    }
    const double n = static_cast<double>(per_split.size());
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& m : per_split) ss += (m.at(key) - mean) * (m.at(key) - mean);
    rep.mean[key] = mean;
    rep.std[key] = per_split.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  return rep;
}

// Keys in fixed order: per_split, mean, std; metric keys sorted.
inline nlohmann::ordered_json to_json(const MetricReport& rep) {
  nlohmann::ordered_json j;
  j["per_split"] = nlohmann::ordered_json::array();
  for (const auto& m : rep.per_split) {
    nlohmann::ordered_json row = nlohmann::ordered_json::object();
    for (const auto& [k, v] : m) row[k] = v;
    j["per_split"].push_back(row);
  }
  for (const auto* field : {"mean", "std"}) {
    const auto& src = std::string(field) == "mean" ? rep.mean : rep.std;
    nlohmann::ordered_json row = nlohmann::ordered_json::object();
    for (const auto& [k, v] : src) row[k] = v;
    j[field] = row;
  }
  return j;
}

inline std::string format_report(const MetricReport& rep) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < rep.per_split.size(); ++i) {
    out += "split " + std::to_string(i) + ":";
    for (const auto& [k, v] : rep.per_split[i]) {
      std::snprintf(buf, sizeof buf, " %s=%.4f", k.c_str(), v);
      out += buf;
    }
    out += "\n";
  }
  for (const auto& [k, v] : rep.mean) {
    std::snprintf(buf, sizeof buf, "%.4f +- %.4f", v, rep.std.at(k));
    out += k + ": " + buf + "\n";
  }
  return out;
}

}  // namespace cpt
