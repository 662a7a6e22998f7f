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

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cpt/colorspec.hpp"
#include "cpt/error.hpp"
#include "cpt/prompt.hpp"
#include "cpt/raster.hpp"
#include "cpt/scoring.hpp"

namespace cpt {

using Meta = std::map<std::string, std::string>;

// One forward pass: a colorized image, a rendered prompt, and per-slot
// candidates. Scoring is slot-style: each slot lists single-token candidates
// and the backend scores them jointly conditioned on the whole prompt.
struct ScoreRequest {
  RasterImage image{1, 1};
  std::string prompt;
  int mask_count = 1;
  std::vector<std::vector<CandidateTokenSeq>> candidates;
  Meta meta;
};

struct ScoreResponse {
  std::vector<LogProbMap> per_slot_logprobs;
  std::string backend_id;
  std::int64_t latency_ms = 0;
};

inline constexpr double kResponseTolerance = 1e-6;

inline BackendError protocol_error(const std::string& message) {
  return BackendError(ErrorKind::kProtocol, message, false);
}

inline void validate_request(const ScoreRequest& req) {
  if (req.mask_count < 1) throw protocol_error("mask_count must be >= 1");
  if (static_cast<int>(req.candidates.size()) != req.mask_count) {
    throw protocol_error("candidate lists (" + std::to_string(req.candidates.size()) +
                         ") do not match mask_count (" + std::to_string(req.mask_count) + ")");
  }
  for (std::size_t s = 0; s < req.candidates.size(); ++s) {
    if (req.candidates[s].empty()) throw protocol_error("slot " + std::to_string(s) + " has no candidates");
    std::set<std::string> labels;
    for (const auto& c : req.candidates[s]) {
      if (c.label.empty()) throw protocol_error("empty candidate label");
      if (c.tokens.size() != 1) {
        throw protocol_error("slot-style candidate '" + c.label + "' must carry exactly one token");
      }
      if (!labels.insert(c.label).second) throw protocol_error("duplicate candidate '" + c.label + "'");
    }
  }
}

// Checks labels against the request and per-slot normalization.
inline void validate_response(const ScoreRequest& req, const ScoreResponse& resp,
                              double tolerance = kResponseTolerance) {
  if (resp.per_slot_logprobs.size() != req.candidates.size()) {
    throw protocol_error("response has " + std::to_string(resp.per_slot_logprobs.size()) +
                         " slots, request has " + std::to_string(req.candidates.size()));
  }
  if (resp.latency_ms < 0) throw protocol_error("negative latency");
  for (std::size_t s = 0; s < req.candidates.size(); ++s) {
    const auto& slot = resp.per_slot_logprobs[s];
    std::set<std::string> want;
    for (const auto& c : req.candidates[s]) want.insert(c.label);
    std::set<std::string> got;
    double total = 0.0;
    for (const auto& [label, lp] : slot) {
      if (!std::isfinite(lp)) throw protocol_error("non-finite log-probability for '" + label + "'");
      got.insert(label);
      total += std::exp(lp);
    }
    if (got != want) throw protocol_error("slot " + std::to_string(s) + " labels do not match request");
    if (std::abs(total - 1.0) > tolerance) {
      throw protocol_error("slot " + std::to_string(s) + " probabilities sum to " + std::to_string(total));
    }
  }
}

inline MaskDistribution to_distribution(const ScoreResponse& resp) {
  return renormalized(resp.per_slot_logprobs, kResponseTolerance);
}

class ScoringBackend {
 public:
  virtual ~ScoringBackend() = default;
  // Must be safe to call concurrently.
  virtual ScoreResponse score(const ScoreRequest& request) = 0;
  virtual std::string backend_id() const = 0;
};

// Shortest round-trip decimal form, used wherever a double crosses into text.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorKind::kParse, "not a number: '" + std::string(text) + "'");
  }
  return v;
}

inline std::string format_box_meta(const BoundingBox& b) {
  return format_double(b.x) + "," + format_double(b.y) + "," + format_double(b.w) + "," + format_double(b.h);
}

inline BoundingBox parse_box_meta(const std::string& text) {
  std::vector<double> v;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    if (comma == std::string::npos) comma = text.size();
    v.push_back(parse_double(std::string_view(text).substr(start, comma - start)));
    start = comma + 1;
  }
  if (v.size() != 4) throw Error(ErrorKind::kParse, "box '" + text + "' must be x,y,w,h");
  return make_box(v[0], v[1], v[2], v[3]);
}

// ---------------------------------------------------------------------------
// Chromatic oracle
//
// A deterministic stand-in for a vision-language model on synthetic scenes.
// Dispatch is by request meta:
//   target_box + alpha  grounding: m = mean pixel of the target box; a color
//                       candidate with reference rgb p expects the blend of p
//                       over the gray background, logit = -L1(m, expected)/scale;
//                       "none" gets the fixed none_logit.
//   relation_hint       relation: '|'-separated relation labels; a slot
//                       candidate scores 0 if it is the matching token of a
//                       hinted relation of the template's length, mismatch_logit
//                       otherwise; NA tokens get none_logit, or 0 when no
//                       hinted relation has the template's length.
//   task=probe          pure color block: m = image mean, logit = -L1(m, p)/scale.

struct OracleOptions {
  double none_logit = -20.0;
  double distance_scale = 3.0;
  Rgb background{128, 128, 128};
  double mismatch_logit = -10.0;
};

class ChromaticOracle : public ScoringBackend {
 public:
  explicit ChromaticOracle(NamedColorTable table, OracleOptions options = {})
      : table_(std::move(table)), options_(options) {}

  ScoreResponse score(const ScoreRequest& req) override {
    validate_request(req);
    ScoreResponse resp;
    resp.backend_id = backend_id();
    if (req.meta.contains("target_box")) {
      resp.per_slot_logprobs = score_grounding(req);
    } else if (req.meta.contains("relation_hint")) {
      resp.per_slot_logprobs = score_relation(req);
    } else if (auto it = req.meta.find("task"); it != req.meta.end() && it->second == "probe") {
      resp.per_slot_logprobs = score_probe(req);
    } else {
      throw BackendError(ErrorKind::kMissingMeta, "oracle needs target_box, relation_hint or task=probe", false);
    }
    return resp;
  }

  std::string backend_id() const override { return "chromatic-oracle"; }

  const NamedColorTable& table() const noexcept { return table_; }

 private:
  struct MeanRgb {
    double r = 0, g = 0, b = 0;
  };

  static MeanRgb mean_over(const RasterImage& img, const PixelRect& rect) {
    MeanRgb m;
    for (int y = rect.y0; y < rect.y1; ++y) {
      for (int x = rect.x0; x < rect.x1; ++x) {
        const auto& p = img.at(x, y);
        m.r += p.r;
        m.g += p.g;
        m.b += p.b;
      }
    }
    const double n = static_cast<double>(rect.area());
    return {m.r / n, m.g / n, m.b / n};
  }

  static double l1(const MeanRgb& m, const Rgb& c) {
    return std::abs(m.r - c.r) + std::abs(m.g - c.g) + std::abs(m.b - c.b);
  }

  Rgb reference(const std::string& label) const {
    auto rgb = table_.lookup(label);
    if (!rgb) throw protocol_error("oracle has no reference color for '" + label + "'");
    return *rgb;
  }

  std::vector<LogProbMap> softmax_slots(const std::vector<std::map<std::string, double>>& logits) const {
    std::vector<LogProbMap> out;
    for (const auto& s : logits) out.push_back(log_softmax(s));
    return out;
  }

  std::vector<LogProbMap> score_grounding(const ScoreRequest& req) const {
    auto alpha_it = req.meta.find("alpha");
    if (alpha_it == req.meta.end()) {
      throw BackendError(ErrorKind::kMissingMeta, "grounding oracle needs meta 'alpha'", false);
    }
    const double alpha = parse_double(alpha_it->second);
    const auto rect = rasterize_box(parse_box_meta(req.meta.at("target_box")), req.image.width(),
                                    req.image.height());
    if (rect.empty()) throw protocol_error("target_box lies outside the image");
    const auto m = mean_over(req.image, rect);
    std::vector<std::map<std::string, double>> logits(req.candidates.size());
    for (std::size_t s = 0; s < req.candidates.size(); ++s) {
      for (const auto& c : req.candidates[s]) {
        if (c.label == kNoneLabel) {
          logits[s][c.label] = options_.none_logit;
        } else {
          const auto expected = blend_pixel(options_.background, reference(c.label), alpha);
          logits[s][c.label] = -l1(m, expected) / options_.distance_scale;
        }
      }
    }
    return softmax_slots(logits);
  }

  std::vector<LogProbMap> score_probe(const ScoreRequest& req) const {
    const auto m = mean_over(req.image, PixelRect{0, 0, req.image.width(), req.image.height()});
    std::vector<std::map<std::string, double>> logits(req.candidates.size());
    for (std::size_t s = 0; s < req.candidates.size(); ++s) {
      for (const auto& c : req.candidates[s]) {
        logits[s][c.label] = -l1(m, reference(c.label)) / options_.distance_scale;
      }
    }
    return softmax_slots(logits);
  }

  std::vector<LogProbMap> score_relation(const ScoreRequest& req) const {
    const int l = req.mask_count;
    std::vector<std::vector<std::string>> hinted;
    std::istringstream in(req.meta.at("relation_hint"));
    std::string label;
    while (std::getline(in, label, '|')) {
      auto tokens = split_words(label);
      if (static_cast<int>(tokens.size()) == l) hinted.push_back(std::move(tokens));
    }
    const auto na = l >= 1 && l <= 3 ? na_relation(l).tokens : std::vector<std::string>{};
    std::vector<std::map<std::string, double>> logits(req.candidates.size());
    for (std::size_t s = 0; s < req.candidates.size(); ++s) {
      for (const auto& c : req.candidates[s]) {
        double z = options_.mismatch_logit;
        for (const auto& h : hinted) {
          if (h[s] == c.label) z = 0.0;
        }
        // With no hinted relation of this length the NA placeholder wins.
        if (z != 0.0 && s < na.size() && na[s] == c.label) z = hinted.empty() ? 0.0 : options_.none_logit;
        logits[s][c.label] = z;
      }
    }
    return softmax_slots(logits);
  }

  NamedColorTable table_;
  OracleOptions options_;
};

// ---------------------------------------------------------------------------
// Hash stub
//
// Mirrors the reference server's stub mode: logit(label) = u(FNV-1a-64 of
// prompt + '\x1f' + label), where u(h) = (h >> 11) * 2^-53 maps to [0,1);
// each slot is softmax-normalized. Deterministic across processes and
// platforms.

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline double stub_logit(std::string_view prompt, std::string_view label) {
  std::string key(prompt);
  key += '\x1f';
  key += label;
  return static_cast<double>(fnv1a64(key) >> 11) * 0x1.0p-53;
}

class HashStubBackend : public ScoringBackend {
 public:
  ScoreResponse score(const ScoreRequest& req) override {
    validate_request(req);
    ScoreResponse resp;
    resp.backend_id = backend_id();
    for (const auto& slot : req.candidates) {
      std::map<std::string, double> logits;
      for (const auto& c : slot) logits[c.label] = stub_logit(req.prompt, c.label);
      resp.per_slot_logprobs.push_back(log_softmax(logits));
    }
    return resp;
  }

  std::string backend_id() const override { return "stub"; }
};

// ---------------------------------------------------------------------------
// Planted probe surface
//
// For color-search tests: the "probability" of text w for a pure block of
// color v is max(0, 1 - L1(v, planted(w)) / radius). These are independent
// match scores, not a distribution, so responses from this backend do not
// sum to one; zero scores are reported as -inf log-probabilities.

class PlantedProbeBackend : public ScoringBackend {
 public:
  explicit PlantedProbeBackend(NamedColorTable planted, double radius = 90.0)
      : planted_(std::move(planted)), radius_(radius) {}

  static double surface(const Rgb& v, const Rgb& planted, double radius) {
    return std::max(0.0, 1.0 - static_cast<double>(l1_distance(v, planted)) / radius);
  }

  ScoreResponse score(const ScoreRequest& req) override {
    validate_request(req);
    const Rgb v = req.image.at(0, 0);
    ScoreResponse resp;
    resp.backend_id = backend_id();
    for (const auto& slot : req.candidates) {
      LogProbMap out;
      for (const auto& c : slot) {
        auto p = planted_.lookup(c.label);
        const double s = p ? surface(v, *p, radius_) : 0.0;
        out[c.label] = std::log(s);
      }
      resp.per_slot_logprobs.push_back(std::move(out));
    }
    return resp;
  }

  std::string backend_id() const override { return "planted-probe"; }

 private:
  NamedColorTable planted_;
  double radius_;
};

// Counts forwarded calls; thread-safe.
class CountingBackend : public ScoringBackend {
 public:
  explicit CountingBackend(ScoringBackend& inner) : inner_(inner) {}

  ScoreResponse score(const ScoreRequest& req) override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_.score(req);
  }
  std::string backend_id() const override { return inner_.backend_id(); }
  std::size_t calls() const noexcept { return calls_.load(); }
  void reset() noexcept { calls_.store(0); }

 private:
  ScoringBackend& inner_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace cpt
