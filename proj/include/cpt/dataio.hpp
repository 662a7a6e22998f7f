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

#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpt/backend.hpp"
#include "cpt/error.hpp"
#include "cpt/evalkit.hpp"
#include "cpt/image_io.hpp"
#include "cpt/raster.hpp"

namespace cpt {

// Dataset layout: `data.jsonl` next to an `images/` directory; image and mask
// references are relative to the dataset file's directory.
//
// Grounding record:
//   {"id": str, "image": str, "query": str,
//    "proposals": [[x,y,w,h] | {"box": [x,y,w,h], "mask": str}, ...],
//    "gold_box": [x,y,w,h], "split": str?, "meta": {str: str}?}
// A mask is a relative PNG path or an inline run-length string `w,h:runs`.
//
// Relation record:
//   {"id": str, "image": str,
//    "subject": {"text": str, "box": [x,y,w,h]},
//    "object": {"text": str, "box": [x,y,w,h]},
//    "gold_relations": [str, ...], "meta": {str: str}?}

struct Proposal {
  BoundingBox box;
  std::optional<std::string> mask;

  friend bool operator==(const Proposal&, const Proposal&) = default;
};

struct GroundingInstance {
  std::string id;
  std::string image_ref;
  std::string query;
  std::vector<Proposal> proposals;
  BoundingBox gold_box;
  std::string split = "test";
  Meta meta;

  std::vector<BoundingBox> boxes() const {
    std::vector<BoundingBox> out;
    for (const auto& p : proposals) out.push_back(p.box);
    return out;
  }

  friend bool operator==(const GroundingInstance&, const GroundingInstance&) = default;
};

struct RelationEntity {
  std::string text;
  BoundingBox box;

  friend bool operator==(const RelationEntity&, const RelationEntity&) = default;
};

struct RelationInstance {
  std::string id;
  std::string image_ref;
  RelationEntity subject;
  RelationEntity object;
  std::vector<std::string> gold_relations;
  Meta meta;

  friend bool operator==(const RelationInstance&, const RelationInstance&) = default;
};

struct PredictionRecord {
  std::string id;
  std::optional<std::size_t> predicted_index;
  std::optional<BoundingBox> predicted_box;
  // True when no region beat its batch's "none" and the global best region
  // was reported instead.
  bool fallback = false;
  std::vector<double> per_region_prob;
  std::optional<std::string> error;
  double timing_ms = 0.0;
  std::size_t backend_calls = 0;
};

namespace detail {

inline BoundingBox box_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw Error(ErrorKind::kValidation, "box must be [x,y,w,h]");
  for (const auto& v : j) {
    if (!v.is_number()) throw Error(ErrorKind::kValidation, "box entries must be numbers");
  }
  BoundingBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (!b.valid()) throw Error(ErrorKind::kValidation, "box needs x,y >= 0 and w,h > 0");
  return b;
}

// Integral coordinates are written as integers so integer inputs round-trip.
inline nlohmann::ordered_json coord_to_json(double v) {
  if (v == std::floor(v) && std::abs(v) < 9007199254740992.0) return static_cast<std::int64_t>(v);
  return v;
}

inline nlohmann::ordered_json box_to_json(const BoundingBox& b) {
  return nlohmann::ordered_json::array({coord_to_json(b.x), coord_to_json(b.y), coord_to_json(b.w), coord_to_json(b.h)});
}

inline const nlohmann::json& require(const nlohmann::json& j, const char* field, std::size_t line) {
  if (!j.contains(field)) throw InputError(ErrorKind::kValidation, line, field, "missing required field");
  return j.at(field);
}

inline std::string require_string(const nlohmann::json& j, const char* field, std::size_t line,
                                  bool non_empty = true) {
  const auto& v = require(j, field, line);
  if (!v.is_string()) throw InputError(ErrorKind::kValidation, line, field, "must be a string");
  auto s = v.get<std::string>();
  if (non_empty && split_words(s).empty()) throw InputError(ErrorKind::kValidation, line, field, "must be non-empty");
  return s;
}

inline BoundingBox require_box(const nlohmann::json& j, const std::string& field, std::size_t line) {
  try {
    return box_from_json(j);
  } catch (const Error& e) {
    throw InputError(ErrorKind::kValidation, line, field, e.what());
  }
}

inline Meta read_meta(const nlohmann::json& j, std::size_t line) {
  Meta meta;
  if (!j.contains("meta")) return meta;
  const auto& m = j.at("meta");
  if (!m.is_object()) throw InputError(ErrorKind::kValidation, line, "meta", "must be an object");
  for (const auto& [k, v] : m.items()) {
    if (!v.is_string()) throw InputError(ErrorKind::kValidation, line, "meta." + k, "must be a string");
    meta[k] = v.get<std::string>();
  }
  return meta;
}

inline nlohmann::ordered_json meta_to_json(const Meta& meta) {
  auto out = nlohmann::ordered_json::object();
  for (const auto& [k, v] : meta) out[k] = v;
  return out;
}

// Calls fn(json, line) for each non-blank line.
template <typename Fn>
void for_each_jsonl(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (split_words(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(ErrorKind::kParse, lineno, "", e.what());
    }
    if (!j.is_object()) throw InputError(ErrorKind::kParse, lineno, "", "record must be a JSON object");
    fn(j, lineno);
  }
}

}  // namespace detail

// Writes through a temporary sibling and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  write_file_bytes(tmp, content);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot rename " + tmp.string() + ": " + ec.message());
}

inline std::vector<GroundingInstance> load_grounding(const std::filesystem::path& path) {
  std::vector<GroundingInstance> out;
  std::set<std::string> ids;
  detail::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    GroundingInstance g;
    g.id = detail::require_string(j, "id", line);
    if (!ids.insert(g.id).second) throw InputError(ErrorKind::kValidation, line, "id", "duplicate id '" + g.id + "'");
    g.image_ref = detail::require_string(j, "image", line);
    g.query = detail::require_string(j, "query", line);
    const auto& props = detail::require(j, "proposals", line);
    if (!props.is_array() || props.empty()) {
      throw InputError(ErrorKind::kValidation, line, "proposals", "must be a non-empty array");
    }
    for (std::size_t i = 0; i < props.size(); ++i) {
      const std::string field = "proposals[" + std::to_string(i) + "]";
      Proposal p;
      if (props[i].is_object()) {
        p.box = detail::require_box(detail::require(props[i], "box", line), field + ".box", line);
        if (props[i].contains("mask") && !props[i]["mask"].is_null()) {
          if (!props[i]["mask"].is_string()) throw InputError(ErrorKind::kValidation, line, field + ".mask", "must be a string");
          p.mask = props[i]["mask"].get<std::string>();
        }
      } else {
        p.box = detail::require_box(props[i], field, line);
      }
      g.proposals.push_back(std::move(p));
    }
    g.gold_box = detail::require_box(detail::require(j, "gold_box", line), "gold_box", line);
    if (j.contains("split")) g.split = detail::require_string(j, "split", line);
    g.meta = detail::read_meta(j, line);
    out.push_back(std::move(g));
  });
  return out;
}

inline nlohmann::ordered_json to_json(const GroundingInstance& g) {
  nlohmann::ordered_json j;
  j["id"] = g.id;
  j["image"] = g.image_ref;
  j["query"] = g.query;
  auto props = nlohmann::ordered_json::array();
  for (const auto& p : g.proposals) {
    if (p.mask) {
      nlohmann::ordered_json o;
      o["box"] = detail::box_to_json(p.box);
      o["mask"] = *p.mask;
      props.push_back(std::move(o));
    } else {
      props.push_back(detail::box_to_json(p.box));
    }
  }
  j["proposals"] = std::move(props);
  j["gold_box"] = detail::box_to_json(g.gold_box);
  j["split"] = g.split;
  if (!g.meta.empty()) j["meta"] = detail::meta_to_json(g.meta);
  return j;
}

inline void save_grounding(const std::filesystem::path& path, const std::vector<GroundingInstance>& data) {
  std::string out;
  for (const auto& g : data) out += to_json(g).dump() + "\n";
  write_file_atomic(path, out);
}

inline std::vector<RelationInstance> load_relations(const std::filesystem::path& path) {
  std::vector<RelationInstance> out;
  std::set<std::string> ids;
  detail::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    RelationInstance r;
    r.id = detail::require_string(j, "id", line);
    if (!ids.insert(r.id).second) throw InputError(ErrorKind::kValidation, line, "id", "duplicate id '" + r.id + "'");
    r.image_ref = detail::require_string(j, "image", line);
    for (const char* role : {"subject", "object"}) {
      const auto& e = detail::require(j, role, line);
      if (!e.is_object()) throw InputError(ErrorKind::kValidation, line, role, "must be an object");
      RelationEntity ent;
      const std::string prefix(role);
      if (!e.contains("text")) throw InputError(ErrorKind::kValidation, line, prefix + ".text", "missing required field");
      if (!e["text"].is_string() || split_words(e["text"].get<std::string>()).empty()) {
        throw InputError(ErrorKind::kValidation, line, prefix + ".text", "must be a non-empty string");
      }
      ent.text = e["text"].get<std::string>();
      if (!e.contains("box")) throw InputError(ErrorKind::kValidation, line, prefix + ".box", "missing required field");
      ent.box = detail::require_box(e["box"], prefix + ".box", line);
      (prefix == "subject" ? r.subject : r.object) = std::move(ent);
    }
    const auto& rels = detail::require(j, "gold_relations", line);
    if (!rels.is_array()) throw InputError(ErrorKind::kValidation, line, "gold_relations", "must be an array");
    for (const auto& rel : rels) {
      if (!rel.is_string() || split_words(rel.get<std::string>()).empty()) {
        throw InputError(ErrorKind::kValidation, line, "gold_relations", "entries must be non-empty strings");
      }
      r.gold_relations.push_back(rel.get<std::string>());
    }
    r.meta = detail::read_meta(j, line);
    out.push_back(std::move(r));
  });
  return out;
}

inline nlohmann::ordered_json to_json(const RelationInstance& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["image"] = r.image_ref;
  for (const auto* e : {&r.subject, &r.object}) {
    nlohmann::ordered_json o;
    o["text"] = e->text;
    o["box"] = detail::box_to_json(e->box);
    j[e == &r.subject ? "subject" : "object"] = std::move(o);
  }
  j["gold_relations"] = r.gold_relations;
  if (!r.meta.empty()) j["meta"] = detail::meta_to_json(r.meta);
  return j;
}

inline void save_relations(const std::filesystem::path& path, const std::vector<RelationInstance>& data) {
  std::string out;
  for (const auto& r : data) out += to_json(r).dump() + "\n";
  write_file_atomic(path, out);
}

inline nlohmann::ordered_json to_json(const PredictionRecord& p, bool include_timing = true) {
  nlohmann::ordered_json j;
  j["id"] = p.id;
  j["predicted_index"] = p.predicted_index ? nlohmann::ordered_json(*p.predicted_index) : nlohmann::ordered_json();
  j["predicted_box"] = p.predicted_box ? detail::box_to_json(*p.predicted_box) : nlohmann::ordered_json();
  j["fallback"] = p.fallback;
  j["per_region_prob"] = p.per_region_prob;
  j["backend_calls"] = p.backend_calls;
  if (p.error) j["error"] = *p.error;
  if (include_timing) j["timing_ms"] = p.timing_ms;
  return j;
}

inline std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
  std::vector<PredictionRecord> out;
  detail::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    PredictionRecord p;
    p.id = detail::require_string(j, "id", line);
    if (j.contains("predicted_box") && !j["predicted_box"].is_null()) {
      p.predicted_box = detail::require_box(j["predicted_box"], "predicted_box", line);
    }
    if (j.contains("predicted_index") && j["predicted_index"].is_number_unsigned()) {
      p.predicted_index = j["predicted_index"].get<std::size_t>();
    }
    if (j.contains("fallback") && j["fallback"].is_boolean()) p.fallback = j["fallback"].get<bool>();
    if (j.contains("per_region_prob") && j["per_region_prob"].is_array()) {
      p.per_region_prob = j["per_region_prob"].get<std::vector<double>>();
    }
    if (j.contains("error") && j["error"].is_string()) p.error = j["error"].get<std::string>();
    if (j.contains("timing_ms") && j["timing_ms"].is_number()) p.timing_ms = j["timing_ms"].get<double>();
    out.push_back(std::move(p));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic scenes

struct SyntheticOptions {
  int width = 96;
  int height = 96;
  int min_side = 8;
  int max_side = 32;
  double alpha = 0.5;
  Rgb background{128, 128, 128};
};

struct SyntheticDataset {
  std::vector<GroundingInstance> instances;
  std::map<std::string, RasterImage> images;  // keyed by image_ref
};

// Each scene: a uniform gray image with k in [1, max_proposals] integer,
// pairwise disjoint boxes (so pairwise IoU is 0); one of them is the target.
// Scene i draws from split_generator(seed, i).
inline SyntheticDataset generate_synthetic_grounding(int n_scenes, int max_proposals, std::uint64_t seed,
                                                     const SyntheticOptions& opt = {}) {
  if (n_scenes < 1) throw Error(ErrorKind::kInvalidArgument, "n_scenes must be >= 1");
  if (max_proposals < 1) throw Error(ErrorKind::kInvalidArgument, "max_proposals must be >= 1");
  if (opt.min_side < 1 || opt.max_side < opt.min_side || opt.max_side > opt.width || opt.max_side > opt.height) {
    throw Error(ErrorKind::kInvalidArgument, "invalid synthetic box size range");
  }
  SyntheticDataset ds;
  for (int s = 0; s < n_scenes; ++s) {
    auto rng = split_generator(seed, static_cast<std::size_t>(s));
    const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_proposals)));
    std::vector<BoundingBox> boxes;
    for (int attempt = 0; static_cast<int>(boxes.size()) < k && attempt < 10000; ++attempt) {
      const int side_range = opt.max_side - opt.min_side + 1;
      const int w = opt.min_side + static_cast<int>(rng.below(side_range));
      const int h = opt.min_side + static_cast<int>(rng.below(side_range));
      const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(opt.width - w + 1)));
      const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(opt.height - h + 1)));
      BoundingBox b{double(x), double(y), double(w), double(h)};
      const bool clear = std::all_of(boxes.begin(), boxes.end(), [&](const BoundingBox& o) { return iou(b, o) == 0.0; });
      if (clear) boxes.push_back(b);
    }
    const auto target = static_cast<std::size_t>(rng.below(boxes.size()));
    char id[32];
    std::snprintf(id, sizeof id, "syn-%05d", s);
    GroundingInstance g;
    g.id = id;
    g.image_ref = std::string("images/") + id + ".png";
    g.query = "target " + std::to_string(target);
    for (const auto& b : boxes) g.proposals.push_back({b, std::nullopt});
    g.gold_box = boxes[target];
    g.meta["target_box"] = format_box_meta(boxes[target]);
    g.meta["alpha"] = format_double(opt.alpha);
    ds.images.emplace(g.image_ref, RasterImage(opt.width, opt.height, opt.background));
    ds.instances.push_back(std::move(g));
  }
  return ds;
}

inline void write_synthetic(const std::filesystem::path& dir, const SyntheticDataset& ds) {
  std::filesystem::create_directories(dir / "images");
  for (const auto& [ref, img] : ds.images) write_file_atomic(dir / ref, encode_png(img));
  save_grounding(dir / "data.jsonl", ds.instances);
}

}  // namespace cpt
