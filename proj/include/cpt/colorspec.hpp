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
#include <cctype>
#include <compare>
#include <cstdlib>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cpt/error.hpp"

namespace cpt {

// Candidate label reserved for "no target region in this batch".
inline constexpr const char* kNoneLabel = "none";

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend constexpr auto operator<=>(const Rgb&, const Rgb&) = default;
};

inline std::string to_string(const Rgb& c) {
  return std::to_string(c.r) + "," + std::to_string(c.g) + "," + std::to_string(c.b);
}

// Parses "r,g,b" with each channel in [0,255].
inline Rgb parse_rgb(const std::string& text) {
  std::istringstream in(text);
  int ch[3];
  char sep1 = 0, sep2 = 0;
  if (!(in >> ch[0] >> sep1 >> ch[1] >> sep2 >> ch[2]) || sep1 != ',' || sep2 != ',') {
    throw Error(ErrorKind::kParse, "malformed rgb '" + text + "'");
  }
  in >> std::ws;
  if (!in.eof()) throw Error(ErrorKind::kParse, "trailing characters in rgb '" + text + "'");
  for (int v : ch) {
    if (v < 0 || v > 255) throw Error(ErrorKind::kParse, "rgb channel out of range in '" + text + "'");
  }
  return Rgb{static_cast<std::uint8_t>(ch[0]), static_cast<std::uint8_t>(ch[1]),
             static_cast<std::uint8_t>(ch[2])};
}

inline int l1_distance(const Rgb& a, const Rgb& b) {
  return std::abs(int(a.r) - int(b.r)) + std::abs(int(a.g) - int(b.g)) +
         std::abs(int(a.b) - int(b.b));
}

// Lowercase text with no surrounding whitespace.
class ColorText {
 public:
  explicit ColorText(std::string text) : text_(std::move(text)) {
    if (text_.empty()) throw Error(ErrorKind::kEmptyText, "color text is empty");
    if (std::isspace(static_cast<unsigned char>(text_.front())) ||
        std::isspace(static_cast<unsigned char>(text_.back()))) {
      throw Error(ErrorKind::kInvalidArgument, "color text '" + text_ + "' has surrounding whitespace");
    }
    for (char c : text_) {
      if (std::isupper(static_cast<unsigned char>(c))) {
        throw Error(ErrorKind::kInvalidArgument, "color text '" + text_ + "' is not lowercase");
      }
    }
  }

  const std::string& str() const noexcept { return text_; }

  friend auto operator<=>(const ColorText&, const ColorText&) = default;

 private:
  std::string text_;
};

struct Color {
  Rgb visual;
  ColorText text;

  friend bool operator==(const Color&, const Color&) = default;
};

// Ordered co-referential markers; texts and visuals are pairwise distinct.
class ColorSet {
 public:
  explicit ColorSet(std::vector<Color> colors) : colors_(std::move(colors)) {
    if (colors_.empty()) throw Error(ErrorKind::kInvalidArgument, "color set is empty");
    std::set<std::string> texts;
    std::set<Rgb> visuals;
    for (const auto& c : colors_) {
      if (!texts.insert(c.text.str()).second) {
        throw Error(ErrorKind::kDuplicateColor, "duplicate color text '" + c.text.str() + "'");
      }
      if (!visuals.insert(c.visual).second) {
        throw Error(ErrorKind::kDuplicateColor, "duplicate rgb " + to_string(c.visual));
      }
    }
  }

  const std::vector<Color>& colors() const noexcept { return colors_; }
  std::size_t size() const noexcept { return colors_.size(); }
  const Color& operator[](std::size_t i) const { return colors_.at(i); }

  // Grounding decodes "none" as a reserved label; a set that uses it cannot
  // be assembled into a prompt bundle.
  void require_no_reserved_label() const {
    for (const auto& c : colors_) {
      if (c.text.str() == kNoneLabel) {
        throw Error(ErrorKind::kValidation, "color text 'none' is reserved");
      }
    }
  }

  friend bool operator==(const ColorSet&, const ColorSet&) = default;

 private:
  std::vector<Color> colors_;
};

struct CandidateSets {
  std::vector<ColorText> texts;
  std::vector<Rgb> visuals;

  CandidateSets(std::vector<ColorText> t, std::vector<Rgb> v) {
    std::set<std::string> seen_t;
    for (auto& x : t) {
      if (seen_t.insert(x.str()).second) texts.push_back(std::move(x));
    }
    std::set<Rgb> seen_v;
    for (const auto& x : v) {
      if (seen_v.insert(x).second) visuals.push_back(x);
    }
    if (texts.empty() || visuals.empty()) {
      throw Error(ErrorKind::kInvalidArgument, "candidate sets must be non-empty");
    }
  }
};

// Cartesian product of per-channel offsets {base + k*step : |k*step| <= radius},
// clamped to [0,255], deduplicated and sorted lexicographically by (r,g,b).
inline std::vector<Rgb> build_rgb_grid(const Rgb& base, int radius = 30, int step = 5) {
  if (radius < 0) throw Error(ErrorKind::kInvalidArgument, "grid radius must be >= 0");
  if (step < 1) throw Error(ErrorKind::kInvalidArgument, "grid step must be >= 1");
  auto channel_values = [&](int center) {
    std::set<int> values;
    for (int k = -(radius / step); k <= radius / step; ++k) {
      values.insert(std::clamp(center + k * step, 0, 255));
    }
    return std::vector<int>(values.begin(), values.end());
  };
  const auto rs = channel_values(base.r);
  const auto gs = channel_values(base.g);
  const auto bs = channel_values(base.b);
  std::vector<Rgb> grid;
  grid.reserve(rs.size() * gs.size() * bs.size());
  for (int r : rs) {
    for (int g : gs) {
      for (int b : bs) {
        grid.push_back(Rgb{static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
                           static_cast<std::uint8_t>(b)});
      }
    }
  }
  return grid;
}

// Merges several grids into one sorted, duplicate-free candidate list.
inline std::vector<Rgb> merge_rgb_grids(const std::vector<std::vector<Rgb>>& grids) {
  std::set<Rgb> all;
  for (const auto& g : grids) all.insert(g.begin(), g.end());
  return {all.begin(), all.end()};
}

/// Top-6 colors of the frequency baseline: most frequent color words at their
/// standard RGB.
inline ColorSet preset_frequency_colors() {
  return ColorSet({
      {{255, 0, 0}, ColorText("red")},
      {{0, 0, 0}, ColorText("black")},
      {{0, 0, 255}, ColorText("blue")},
      {{0, 255, 0}, ColorText("green")},
      {{255, 255, 0}, ColorText("yellow")},
      {{165, 42, 42}, ColorText("brown")},
  });
}

/// Top-6 colors selected by cross-modal prompt search.
inline ColorSet preset_cps_colors() {
  return ColorSet({
      {{240, 0, 30}, ColorText("red")},
      {{155, 50, 210}, ColorText("purple")},
      {{255, 255, 25}, ColorText("yellow")},
      {{0, 10, 255}, ColorText("blue")},
      {{255, 170, 230}, ColorText("pink")},
      {{0, 255, 0}, ColorText("green")},
  });
}

// Single-color configuration used for zero- and few-shot grounding runs.
inline ColorSet preset_default_color() {
  return ColorSet({{{240, 0, 30}, ColorText("red")}});
}

inline std::optional<ColorSet> preset_by_name(const std::string& name) {
  if (name == "cps") return preset_cps_colors();
  if (name == "freq" || name == "frequency") return preset_frequency_colors();
  if (name == "default" || name == "red") return preset_default_color();
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Named-color tables: UTF-8, one `name<TAB>r,g,b` record per line. Blank lines
// and lines starting with '#' are skipped.

inline std::vector<Color> parse_color_records(std::istream& in) {
  std::vector<Color> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw InputError(ErrorKind::kParse, lineno, "", "expected name<TAB>r,g,b");
    }
    try {
      out.push_back(Color{parse_rgb(line.substr(tab + 1)), ColorText(line.substr(0, tab))});
    } catch (const InputError&) {
      throw;
    } catch (const Error& e) {
      throw InputError(ErrorKind::kParse, lineno, "", e.what());
    }
  }
  return out;
}

inline std::vector<Color> read_color_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return parse_color_records(in);
}

inline std::string format_color_records(const ColorSet& set) {
  std::string out;
  for (const auto& c : set.colors()) out += c.text.str() + "\t" + to_string(c.visual) + "\n";
  return out;
}

// Name -> reference RGB lookup. Later registrations override earlier ones, so
// a registered ColorSet takes precedence over the shipped standard table.
class NamedColorTable {
 public:
  NamedColorTable() = default;
  explicit NamedColorTable(const std::vector<Color>& colors) { add(colors); }

  void add(const std::vector<Color>& colors) {
    for (const auto& c : colors) entries_.insert_or_assign(c.text.str(), c.visual);
  }
  void add(const ColorSet& set) { add(set.colors()); }

  std::optional<Rgb> lookup(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<std::string, Rgb>& entries() const noexcept { return entries_; }

 private:
  std::map<std::string, Rgb> entries_;
};

}  // namespace cpt
