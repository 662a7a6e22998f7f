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
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cpt/backend.hpp"
#include "cpt/colorspec.hpp"
#include "cpt/error.hpp"
#include "cpt/prompt.hpp"
#include "cpt/raster.hpp"

namespace cpt {

// Decoding scores s(visual, text), row-major: one row per visual candidate.
class ScoreMatrix {
 public:
  ScoreMatrix(std::vector<Rgb> rows, std::vector<ColorText> cols)
      : rows_(std::move(rows)), cols_(std::move(cols)), values_(rows_.size() * cols_.size(), 0.0) {
    if (rows_.empty() || cols_.empty()) throw Error(ErrorKind::kInvalidArgument, "score matrix needs rows and columns");
  }

  const std::vector<Rgb>& rows() const noexcept { return rows_; }
  const std::vector<ColorText>& cols() const noexcept { return cols_; }

  double at(std::size_t row, std::size_t col) const { return values_.at(row * cols_.size() + col); }

  void set(std::size_t row, std::size_t col, double v) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorKind::kValidation, "decoding score " + format_double(v) + " outside [0,1]");
    }
    values_.at(row * cols_.size() + col) = v;
  }

  friend bool operator==(const ScoreMatrix&, const ScoreMatrix&) = default;

 private:
  std::vector<Rgb> rows_;
  std::vector<ColorText> cols_;
  std::vector<double> values_;
};

struct ProbeOptions {
  int block_size = 224;
  std::size_t jobs = 1;
};

// Feeds a pure block of each visual candidate with the probe prompt; every
// text candidate is offered for the single mask and its probability stored.
// Row assembly is independent of completion order.
inline ScoreMatrix probe_scores(ScoringBackend& backend, const CandidateSets& candidates,
                                const PromptText& probe, ProbeOptions options = {}) {
  if (options.block_size < 1) throw Error(ErrorKind::kInvalidArgument, "block size must be >= 1");
  if (probe.mask_count() != 1) throw Error(ErrorKind::kBadMaskCount, "probe prompt must have one mask");
  ScoreMatrix matrix(candidates.visuals, candidates.texts);
  std::vector<CandidateTokenSeq> slot;
  for (const auto& t : candidates.texts) slot.push_back({{t.str()}, t.str()});
  const std::string rendered = probe.rendered();

  auto probe_row = [&](std::size_t i) {
    const auto& rgb = candidates.visuals[i];
    ScoreRequest req{pure_color_block(rgb, options.block_size, options.block_size), rendered, 1, {slot},
                     {{"task", "probe"}, {"probe_rgb", to_string(rgb)}}};
    ScoreResponse resp;
    try {
      resp = backend.score(req);
    } catch (const BackendError& e) {
      throw BackendError(e.kind(), "row " + std::to_string(i) + " (" + to_string(rgb) + "): " + e.what(),
                         e.retryable());
    }
    if (resp.per_slot_logprobs.size() != 1) {
      throw BackendError(ErrorKind::kProtocol, "row " + std::to_string(i) + ": expected one slot", false);
    }
    for (std::size_t j = 0; j < candidates.texts.size(); ++j) {
      const auto& label = candidates.texts[j].str();
      auto it = resp.per_slot_logprobs[0].find(label);
      if (it == resp.per_slot_logprobs[0].end() || std::isnan(it->second) || it->second > 1e-12) {
        throw BackendError(ErrorKind::kProtocol,
                           "row " + std::to_string(i) + " col " + std::to_string(j) + " ('" + label +
                               "'): missing or invalid log-probability",
                           false);
      }
      matrix.set(i, j, std::min(1.0, std::exp(it->second)));
    }
  };

  const std::size_t n = candidates.visuals.size();
  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) probe_row(i);
    return matrix;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex err_mu;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          probe_row(i);
        } catch (...) {
          std::lock_guard lock(err_mu);
          if (!first_error) first_error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return matrix;
}

// Selects the color set from a score matrix:
//  1. entries below the threshold are zeroed;
//  2. each visual with a surviving entry elects its best text (first
//     occurrence order, ties to the lower column);
//  3. each elected text takes its best visual (ties to the lower row);
//  4. pairs are ordered by descending score; when two texts share a visual,
//     the higher-scoring pair keeps it.
inline ColorSet search(const ScoreMatrix& matrix, double discard_threshold = 0.8) {
  if (!(discard_threshold >= 0.0) || !std::isfinite(discard_threshold)) {
    throw Error(ErrorKind::kInvalidArgument, "discard threshold must be a finite value >= 0");
  }
  const auto& rows = matrix.rows();
  const auto& cols = matrix.cols();
  auto kept = [&](std::size_t i, std::size_t j) {
    const double v = matrix.at(i, j);
    return v >= discard_threshold && v > 0.0 ? v : 0.0;
  };

  std::vector<std::size_t> elected;
  std::vector<bool> is_elected(cols.size(), false);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::size_t best = cols.size();
    double best_v = 0.0;
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const double v = kept(i, j);
      if (v > best_v) {
        best_v = v;
        best = j;
      }
    }
    if (best < cols.size() && !is_elected[best]) {
      is_elected[best] = true;
      elected.push_back(best);
    }
  }
  if (elected.empty()) {
    throw Error(ErrorKind::kAllDiscarded, "no decoding score reaches " + format_double(discard_threshold));
  }

  struct Pair {
    std::size_t row, col;
    double score;
  };
  std::vector<Pair> pairs;
  for (auto j : elected) {
    std::size_t best = 0;
    double best_v = -1.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double v = kept(i, j);
      if (v > best_v) {
        best_v = v;
        best = i;
      }
    }
    pairs.push_back({best, j, best_v});
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.score > b.score; });

  std::vector<Color> out;
  std::set<Rgb> used;
  for (const auto& p : pairs) {
    if (!used.insert(rows[p.row]).second) continue;
    out.push_back(Color{rows[p.row], cols[p.col]});
  }
  return ColorSet(std::move(out));
}

// Restricts a matrix to the given visuals and texts (in the matrix's order).
inline ScoreMatrix restrict_matrix(const ScoreMatrix& m, const std::set<Rgb>& visuals,
                                   const std::set<std::string>& texts) {
  std::vector<std::size_t> ri, ci;
  std::vector<Rgb> rows;
  std::vector<ColorText> cols;
  for (std::size_t i = 0; i < m.rows().size(); ++i) {
    if (visuals.contains(m.rows()[i])) {
      ri.push_back(i);
      rows.push_back(m.rows()[i]);
    }
  }
  for (std::size_t j = 0; j < m.cols().size(); ++j) {
    if (texts.contains(m.cols()[j].str())) {
      ci.push_back(j);
      cols.push_back(m.cols()[j]);
    }
  }
  ScoreMatrix out(rows, cols);
  for (std::size_t a = 0; a < ri.size(); ++a) {
    for (std::size_t b = 0; b < ci.size(); ++b) out.set(a, b, m.at(ri[a], ci[b]));
  }
  return out;
}

// TSV: header `rgb<TAB>text...`, then `r,g,b<TAB>score...` per visual.
inline std::string format_score_matrix(const ScoreMatrix& m) {
  std::string out = "rgb";
  for (const auto& c : m.cols()) out += "\t" + c.str();
  out += "\n";
  for (std::size_t i = 0; i < m.rows().size(); ++i) {
    out += to_string(m.rows()[i]);
    for (std::size_t j = 0; j < m.cols().size(); ++j) out += "\t" + format_double(m.at(i, j));
    out += "\n";
  }
  return out;
}

inline ScoreMatrix parse_score_matrix(std::istream& in) {
  auto split_tabs = [](const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
      auto tab = line.find('\t', start);
      out.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    return out;
  };
  std::string line;
  if (!std::getline(in, line)) throw InputError(ErrorKind::kParse, 1, "", "empty score matrix");
  auto header = split_tabs(line);
  if (header.size() < 2 || header[0] != "rgb") {
    throw InputError(ErrorKind::kParse, 1, "", "header must be rgb<TAB>text...");
  }
  std::vector<ColorText> cols;
  for (std::size_t j = 1; j < header.size(); ++j) cols.emplace_back(header[j]);
  std::vector<Rgb> rows;
  std::vector<std::vector<double>> values;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != header.size()) {
      throw InputError(ErrorKind::kParse, lineno, "", "expected " + std::to_string(header.size()) + " fields");
    }
    try {
      rows.push_back(parse_rgb(fields[0]));
      std::vector<double> row;
      for (std::size_t j = 1; j < fields.size(); ++j) row.push_back(parse_double(fields[j]));
      values.push_back(std::move(row));
    } catch (const Error& e) {
      throw InputError(ErrorKind::kParse, lineno, "", e.what());
    }
  }
  ScoreMatrix m(rows, cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) m.set(i, j, values[i][j]);
  }
  return m;
}

inline ScoreMatrix read_score_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return parse_score_matrix(in);
}

}  // namespace cpt
