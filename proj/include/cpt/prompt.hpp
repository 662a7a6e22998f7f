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

#include <cctype>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cpt/colorspec.hpp"
#include "cpt/error.hpp"

namespace cpt {

inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kMaskToken = "[MASK]";

// A rendered prompt is a space-separated token stream. Sentinels stay literal
// strings; mapping them onto a tokenizer is the backend's job.
struct PromptSegment {
  enum class Kind { kLiteral, kMask, kQuery };
  Kind kind = Kind::kLiteral;
  std::string text;   // kLiteral / kQuery
  int mask_index = -1;  // kMask

  friend bool operator==(const PromptSegment&, const PromptSegment&) = default;
};

class PromptText {
 public:
  explicit PromptText(std::vector<PromptSegment> segments) : segments_(std::move(segments)) {
    int next = 0;
    for (const auto& s : segments_) {
      if (s.kind == PromptSegment::Kind::kMask) {
        if (s.mask_index != next) {
          throw Error(ErrorKind::kInvalidArgument, "mask slots must be numbered left to right");
        }
        ++next;
      } else if (s.text.empty()) {
        throw Error(ErrorKind::kEmptyText, "prompt segments must be non-empty");
      }
    }
    mask_count_ = next;
  }

  const std::vector<PromptSegment>& segments() const noexcept { return segments_; }
  int mask_count() const noexcept { return mask_count_; }

  std::string rendered() const {
    std::string out(kClsToken);
    for (const auto& s : segments_) {
      out += ' ';
      out += s.kind == PromptSegment::Kind::kMask ? std::string(kMaskToken) : s.text;
    }
    out += ' ';
    out += kSepToken;
    return out;
  }

  // Segment list with query text folded into the surrounding literal runs;
  // this is exactly what parse_prompt() recovers from rendered().
  std::vector<PromptSegment> structure() const {
    std::vector<PromptSegment> out;
    for (const auto& s : segments_) {
      if (s.kind == PromptSegment::Kind::kMask) {
        out.push_back(s);
      } else if (!out.empty() && out.back().kind == PromptSegment::Kind::kLiteral) {
        out.back().text += ' ' + s.text;
      } else {
        out.push_back({PromptSegment::Kind::kLiteral, s.text, -1});
      }
    }
    return out;
  }

 private:
  std::vector<PromptSegment> segments_;
  int mask_count_ = 0;
};

// Inverse of PromptText::rendered() up to query/literal distinction.
inline std::vector<PromptSegment> parse_prompt(std::string_view rendered) {
  const std::string cls = std::string(kClsToken) + ' ';
  const std::string sep = ' ' + std::string(kSepToken);
  if (rendered.size() < cls.size() + sep.size() || !rendered.starts_with(cls) ||
      !rendered.ends_with(sep)) {
    throw Error(ErrorKind::kParse, "prompt must start with [CLS] and end with [SEP]");
  }
  std::string_view body = rendered.substr(cls.size(), rendered.size() - cls.size() - sep.size());
  std::vector<PromptSegment> out;
  int next_mask = 0;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    auto end = body.find(' ', pos);
    if (end == std::string_view::npos) end = body.size();
    const auto tok = body.substr(pos, end - pos);
    if (tok == kClsToken || tok == kSepToken) {
      throw Error(ErrorKind::kParse, "sentinel token inside prompt body");
    }
    if (tok == kMaskToken) {
      out.push_back({PromptSegment::Kind::kMask, {}, next_mask++});
    } else if (!out.empty() && out.back().kind == PromptSegment::Kind::kLiteral) {
      out.back().text += ' ';
      out.back().text += tok;
    } else {
      out.push_back({PromptSegment::Kind::kLiteral, std::string(tok), -1});
    }
    pos = end + 1;
  }
  return out;
}

struct CandidateTokenSeq {
  std::vector<std::string> tokens;
  std::string label;

  friend bool operator==(const CandidateTokenSeq&, const CandidateTokenSeq&) = default;
};

inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

inline CandidateTokenSeq make_candidate(const std::string& label) {
  auto tokens = split_words(label);
  if (tokens.empty()) throw Error(ErrorKind::kEmptyText, "candidate label is empty");
  return {std::move(tokens), label};
}

namespace detail {

inline bool is_blank(std::string_view s) {
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

inline PromptSegment literal(std::string text) {
  return {PromptSegment::Kind::kLiteral, std::move(text), -1};
}

inline void check_mask_count(int l) {
  if (l < 1 || l > 3) {
    throw Error(ErrorKind::kBadMaskCount, "relation templates take 1 to 3 masks, got " + std::to_string(l));
  }
}

}  // namespace detail

// `[CLS] {query} is in [MASK] color [SEP]`; the query is inserted verbatim.
inline PromptText grounding_template(const std::string& query) {
  if (detail::is_blank(query)) throw Error(ErrorKind::kEmptyQuery, "query is empty");
  return PromptText({{PromptSegment::Kind::kQuery, query, -1},
                     detail::literal("is in"),
                     {PromptSegment::Kind::kMask, {}, 0},
                     detail::literal("color")});
}

enum class ProbeVariant { kOfPhoto, kInPhoto };

inline PromptText cps_probe_template(ProbeVariant variant = ProbeVariant::kOfPhoto) {
  return PromptText({detail::literal(variant == ProbeVariant::kOfPhoto ? "a photo of" : "a photo in"),
                     {PromptSegment::Kind::kMask, {}, 0},
                     detail::literal("color")});
}

// `[CLS] The {s} in {ci} color is [MASK]x l the {o} in {cj} color [SEP]`
inline PromptText relation_template(const std::string& subject_text, const ColorText& subject_color,
                                    const std::string& object_text, const ColorText& object_color,
                                    int l) {
  detail::check_mask_count(l);
  if (detail::is_blank(subject_text) || detail::is_blank(object_text)) {
    throw Error(ErrorKind::kEmptyText, "subject and object texts must be non-empty");
  }
  std::vector<PromptSegment> segs;
  segs.push_back(detail::literal("The"));
  segs.push_back({PromptSegment::Kind::kQuery, subject_text, -1});
  segs.push_back(detail::literal("in " + subject_color.str() + " color is"));
  for (int i = 0; i < l; ++i) segs.push_back({PromptSegment::Kind::kMask, {}, i});
  segs.push_back(detail::literal("the"));
  segs.push_back({PromptSegment::Kind::kQuery, object_text, -1});
  segs.push_back(detail::literal("in " + object_color.str() + " color"));
  return PromptText(std::move(segs));
}

// The per-length "no relation" placeholder.
inline CandidateTokenSeq na_relation(int l) {
  detail::check_mask_count(l);
  switch (l) {
    case 1: return {{"irrelevant"}, "irrelevant"};
    case 2: return {{"no", "relation"}, "no relation"};
    default: return {{"no", "relation", "with"}, "no relation with"};
  }
}

}  // namespace cpt
