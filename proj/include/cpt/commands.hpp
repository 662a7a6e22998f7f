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
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <regex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cpt/backend.hpp"
#include "cpt/colorspec.hpp"
#include "cpt/cps.hpp"
#include "cpt/dataio.hpp"
#include "cpt/evalkit.hpp"
#include "cpt/image_io.hpp"
#include "cpt/pipeline.hpp"
#include "cpt/remote.hpp"

#ifndef CPT_DATA_DIR
#define CPT_DATA_DIR "data"
#endif

namespace cpt {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitBackend = 3;
inline constexpr int kExitEmpty = 4;

inline int exit_code_for(const Error& e) {
  if (e.kind() == ErrorKind::kAllDiscarded) return kExitEmpty;
  if (e.is_backend()) return kExitBackend;
  return kExitValidation;
}

struct RunConfig {
  // "single": single (240,0,30) red, batch capacity 1.
  // "toolkit": the searched six-color preset, capacity = color set size.
  std::string mode = "single";
  std::string color_set;  // preset name or color file; empty = mode default
  double alpha = 0.5;
  std::size_t capacity = 0;  // 0 = mode default
  double overlap_threshold = 0.5;
  std::string shape = "block";
  std::string backend = "oracle";
  std::string color_table;  // oracle reference colors; empty = shipped table
  std::uint64_t seed = 0;
  int shots = 0;
  int n_splits = 5;
  int val_size = 16;
  std::string probe_variant = "of";
  std::size_t jobs = 1;

  int grid_radius = 30;
  int grid_step = 5;
  double discard_threshold = 0.8;
  int block_size = 224;
  bool resume = false;
  std::string select_on;  // validation dataset used to pick one searched color

  std::string relation_vocab;
  std::vector<std::size_t> recall_at{1, 2, 5, 20, 50, 100};

  int retries = 4;
  int backoff_ms = 100;
  int timeout_ms = 30000;
};

inline ColorSet resolve_colors(const RunConfig& config) {
  if (config.color_set.empty()) {
    return config.mode == "toolkit" ? preset_cps_colors() : preset_default_color();
  }
  if (auto preset = preset_by_name(config.color_set)) return *preset;
  return ColorSet(read_color_records(config.color_set));
}

inline std::size_t resolve_capacity(const RunConfig& config, const ColorSet& colors) {
  if (config.capacity != 0) return config.capacity;
  return config.mode == "toolkit" ? colors.size() : 1;
}

inline PromptShape resolve_shape(const RunConfig& config) {
  if (config.shape == "block") return PromptShape::kBlock;
  if (config.shape == "mask") return PromptShape::kMask;
  throw Error(ErrorKind::kValidation, "shape must be 'block' or 'mask'");
}

inline ProbeVariant resolve_probe(const RunConfig& config) {
  if (config.probe_variant == "of") return ProbeVariant::kOfPhoto;
  if (config.probe_variant == "in") return ProbeVariant::kInPhoto;
  throw Error(ErrorKind::kValidation, "probe variant must be 'of' or 'in'");
}

inline void validate_config(const RunConfig& config) {
  if (config.mode != "single" && config.mode != "toolkit") {
    throw Error(ErrorKind::kValidation, "mode must be 'single' or 'toolkit'");
  }
  (void)Transparency{config.alpha};
  resolve_shape(config);
  resolve_probe(config);
  if (config.jobs < 1) throw Error(ErrorKind::kValidation, "jobs must be >= 1");
}

inline NamedColorTable load_named_table(const RunConfig& config) {
  std::filesystem::path path = config.color_table;
  if (path.empty()) {
    path = std::filesystem::path(CPT_DATA_DIR) / "named_colors.tsv";
    if (!std::filesystem::exists(path)) return {};
  }
  return NamedColorTable(read_color_records(path));
}

inline std::string resolve_endpoint(const RunConfig& config) {
  const char* env = std::getenv("CPT_BACKEND_URL");
  if (env && *env) return env;
  if (config.backend == "remote") throw Error(ErrorKind::kValidation, "backend 'remote' needs CPT_BACKEND_URL");
  return config.backend;
}

// oracle | stub | planted:<color file> | remote | http(s)://host:port
inline std::unique_ptr<ScoringBackend> make_backend(const RunConfig& config, const ColorSet& colors) {
  const auto& name = config.backend;
  if (name == "oracle") {
    auto table = load_named_table(config);
    table.add(colors);
    return std::make_unique<ChromaticOracle>(std::move(table));
  }
  if (name == "stub") return std::make_unique<HashStubBackend>();
  if (name.rfind("planted:", 0) == 0) {
    return std::make_unique<PlantedProbeBackend>(NamedColorTable(read_color_records(name.substr(8))));
  }
  if (name == "remote" || name.rfind("http://", 0) == 0 || name.rfind("https://", 0) == 0) {
    RemoteOptions opt;
    opt.max_attempts = std::max(1, config.retries);
    opt.base_backoff = std::chrono::milliseconds(config.backoff_ms);
    opt.timeout = std::chrono::milliseconds(config.timeout_ms);
    opt.pool_size = std::max<std::size_t>(1, config.jobs);
    return std::make_unique<RemoteBackend>(resolve_endpoint(config), opt);
  }
  throw Error(ErrorKind::kValidation, "unknown backend '" + name + "'");
}

inline nlohmann::ordered_json config_echo(const RunConfig& config, const ColorSet& colors, std::size_t capacity,
                                          const std::string& backend_id) {
  nlohmann::ordered_json j;
  j["mode"] = config.mode;
  auto cs = nlohmann::ordered_json::array();
  for (const auto& c : colors.colors()) {
    nlohmann::ordered_json e;
    e["text"] = c.text.str();
    e["rgb"] = {c.visual.r, c.visual.g, c.visual.b};
    cs.push_back(std::move(e));
  }
  j["color_set"] = std::move(cs);
  j["alpha"] = config.alpha;
  j["batch_capacity"] = capacity;
  j["overlap_threshold"] = config.overlap_threshold;
  j["shape"] = config.shape;
  j["backend"] = backend_id;
  j["seed"] = config.seed;
  j["shots"] = config.shots;
  j["n_splits"] = config.n_splits;
  j["val_size"] = config.val_size;
  j["probe_variant"] = config.probe_variant;
  return j;
}

// Runs fn(i) for i in [0,n) on up to `jobs` threads; rethrows the first
// exception after all workers stop.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

inline bool looks_like_rle(const std::string& ref) {
  static const std::regex rle(R"(^\d+,\d+:[\d,]*$)");
  return std::regex_match(ref, rle);
}

inline std::vector<RegionInput> load_regions(const GroundingInstance& g, const std::filesystem::path& base,
                                             bool need_masks) {
  std::vector<RegionInput> out;
  for (const auto& p : g.proposals) {
    RegionInput r{p.box, std::nullopt};
    if (need_masks && p.mask) {
      r.mask = looks_like_rle(*p.mask) ? parse_mask_rle(*p.mask) : read_mask_png(base / *p.mask);
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// colorize

struct ColorizeSummary {
  std::size_t images_written = 0;
};

inline ColorizeSummary cmd_colorize(const std::filesystem::path& dataset, const std::filesystem::path& out_dir,
                                    const RunConfig& config) {
  validate_config(config);
  const auto data = load_grounding(dataset);
  const auto base = dataset.parent_path();
  GroundingConfig gc{resolve_colors(config), config.alpha, 0, config.overlap_threshold, resolve_shape(config)};
  gc.capacity = resolve_capacity(config, gc.colors);
  gc.validate();
  std::filesystem::create_directories(out_dir / "images");
  ColorizeSummary summary;
  std::string manifest;
  for (const auto& g : data) {
    const auto image = read_png(base / g.image_ref);
    const auto regions = load_regions(g, base, gc.shape == PromptShape::kMask);
    const auto plan = plan_batches(g.boxes(), gc.effective_capacity(), gc.overlap_threshold);
    const auto colored = colorize_batches(image, regions, plan, gc);
    for (std::size_t b = 0; b < plan.batches.size(); ++b) {
      const std::string file = "images/" + g.id + "_b" + std::to_string(b) + ".png";
      write_file_atomic(out_dir / file, encode_png(colored[b]));
      ++summary.images_written;
      nlohmann::ordered_json line;
      line["id"] = g.id;
      line["batch"] = b;
      line["file"] = file;
      auto assignments = nlohmann::ordered_json::array();
      for (std::size_t i = 0; i < plan.batches[b].members.size(); ++i) {
        nlohmann::ordered_json a;
        a["proposal"] = plan.batches[b].members[i];
        a["color"] = gc.colors[i].text.str();
        a["rgb"] = {gc.colors[i].visual.r, gc.colors[i].visual.g, gc.colors[i].visual.b};
        assignments.push_back(std::move(a));
      }
      line["assignments"] = std::move(assignments);
      manifest += line.dump() + "\n";
    }
  }
  write_file_atomic(out_dir / "manifest.jsonl", manifest);
  return summary;
}

// ---------------------------------------------------------------------------
// ground

struct GroundSummary {
  double accuracy = 0.0;
  std::size_t instances = 0;
  std::size_t errors = 0;
  std::size_t fallbacks = 0;
  std::size_t backend_calls = 0;
  std::vector<PredictionRecord> predictions;  // sorted by id
  double elapsed_ms = 0.0;
};

// Runs grounding over an already-loaded dataset. Per-instance failures
// (missing image, backend error) become error records and the run continues.
inline GroundSummary run_grounding(const std::vector<GroundingInstance>& data, const std::filesystem::path& base,
                                   ScoringBackend& backend, const GroundingConfig& gc, std::size_t jobs) {
  gc.validate();
  const auto start = std::chrono::steady_clock::now();
  CountingBackend counted(backend);
  std::vector<PredictionRecord> records(data.size());
  parallel_for(data.size(), jobs, [&](std::size_t i) {
    const auto& g = data[i];
    PredictionRecord& rec = records[i];
    rec.id = g.id;
    const auto t0 = std::chrono::steady_clock::now();
    CountingBackend local(static_cast<ScoringBackend&>(counted));
    try {
      const auto image = read_png(base / g.image_ref);
      const auto regions = load_regions(g, base, gc.shape == PromptShape::kMask);
      const auto run = ground_image(local, image, regions, g.query, gc, g.meta);
      const auto idx = run.result.effective_prediction();
      rec.predicted_index = idx;
      rec.predicted_box = g.proposals.at(idx).box;
      rec.fallback = !run.result.predicted.has_value();
      for (std::size_t r = 0; r < g.proposals.size(); ++r) rec.per_region_prob.push_back(run.result.per_region_prob.at(r));
    } catch (const Error& e) {
      rec.error = e.what();
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
    rec.backend_calls = local.calls();
    rec.timing_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  });

  GroundSummary s;
  s.instances = data.size();
  std::vector<GroundingOutcome> outcomes;
  for (std::size_t i = 0; i < data.size(); ++i) {
    outcomes.push_back({records[i].predicted_box, data[i].gold_box});
    if (records[i].error) ++s.errors;
    if (records[i].fallback) ++s.fallbacks;
  }
  s.accuracy = grounding_accuracy(outcomes);
  s.backend_calls = counted.calls();
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  s.predictions = std::move(records);
  s.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return s;
}

inline GroundSummary cmd_ground(const std::filesystem::path& dataset, const std::filesystem::path& out_dir,
                                const RunConfig& config) {
  validate_config(config);
  const auto data = load_grounding(dataset);
  GroundingConfig gc{resolve_colors(config), config.alpha, 0, config.overlap_threshold, resolve_shape(config)};
  gc.capacity = resolve_capacity(config, gc.colors);
  auto backend = make_backend(config, gc.colors);
  auto summary = run_grounding(data, dataset.parent_path(), *backend, gc, config.jobs);

  std::string preds;
  for (const auto& p : summary.predictions) preds += to_json(p).dump() + "\n";
  write_file_atomic(out_dir / "predictions.jsonl", preds);
  nlohmann::ordered_json report;
  report["task"] = "grounding";
  report["accuracy"] = summary.accuracy;
  report["instances"] = summary.instances;
  report["errors"] = summary.errors;
  report["fallbacks"] = summary.fallbacks;
  report["backend_calls"] = summary.backend_calls;
  report["config"] = config_echo(config, gc.colors, gc.effective_capacity(), backend->backend_id());
  report["elapsed_ms"] = summary.elapsed_ms;
  write_file_atomic(out_dir / "report.json", report.dump(2) + "\n");
  return summary;
}

// ---------------------------------------------------------------------------
// search-colors

struct SearchSummary {
  ColorSet colors = preset_default_color();
  std::optional<Color> selected;
  std::size_t backend_calls = 0;
  bool resumed = false;
};

// Candidate texts come from a named-color file; visual candidates are the
// merged RGB grids around each text's standard RGB.
inline SearchSummary cmd_search_colors(const std::filesystem::path& candidates_file,
                                       const std::filesystem::path& out_dir, const RunConfig& config) {
  validate_config(config);
  const auto records = read_color_records(candidates_file);
  if (records.empty()) throw Error(ErrorKind::kValidation, "candidate file has no colors");
  std::vector<ColorText> texts;
  std::vector<std::vector<Rgb>> grids;
  for (const auto& c : records) {
    texts.push_back(c.text);
    grids.push_back(build_rgb_grid(c.visual, config.grid_radius, config.grid_step));
  }
  CandidateSets candidates(texts, merge_rgb_grids(grids));

  SearchSummary summary;
  const auto matrix_path = out_dir / "score_matrix.tsv";
  std::optional<ScoreMatrix> matrix;
  if (config.resume && std::filesystem::exists(matrix_path)) {
    matrix = read_score_matrix(matrix_path);
    summary.resumed = true;
  } else {
    auto table = load_named_table(config);
    table.add(records);
    auto backend = config.backend == "oracle" ? std::make_unique<ChromaticOracle>(table)
                                              : make_backend(config, ColorSet({records.front()}));
    CountingBackend counted(*backend);
    matrix = probe_scores(counted, candidates, cps_probe_template(resolve_probe(config)),
                          ProbeOptions{config.block_size, config.jobs});
    summary.backend_calls = counted.calls();
    write_file_atomic(matrix_path, format_score_matrix(*matrix));
  }
  summary.colors = search(*matrix, config.discard_threshold);
  write_file_atomic(out_dir / "colors.tsv", format_color_records(summary.colors));

  if (!config.select_on.empty()) {
    // Pick the single color with the best validation accuracy; ties keep the
    // earlier (higher-scoring) color.
    const auto val = load_grounding(config.select_on);
    const auto base = std::filesystem::path(config.select_on).parent_path();
    double best = -1.0;
    for (const auto& c : summary.colors.colors()) {
      ColorSet single({c});
      auto backend = make_backend(config, single);
      GroundingConfig gc{single, config.alpha, 1, config.overlap_threshold, resolve_shape(config)};
      const double acc = run_grounding(val, base, *backend, gc, config.jobs).accuracy;
      if (acc > best) {
        best = acc;
        summary.selected = c;
      }
    }
    write_file_atomic(out_dir / "selected.tsv", format_color_records(ColorSet({*summary.selected})));
  }
  return summary;
}

// ---------------------------------------------------------------------------
// relations

struct RelationSummary {
  std::map<std::string, double> metrics;
  std::size_t instances = 0;
  std::size_t errors = 0;
  std::vector<RankedImage> images;
};

inline std::string entity_id(const RelationEntity& e) { return e.text + "@" + format_box_meta(e.box); }

inline std::vector<RelationVocabEntry> load_relation_vocab(const RunConfig& config,
                                                           const std::vector<RelationInstance>& data) {
  std::vector<std::string> labels;
  if (!config.relation_vocab.empty()) {
    std::ifstream in(config.relation_vocab);
    if (!in) throw Error(ErrorKind::kIo, "cannot open " + config.relation_vocab);
    std::string line;
    while (std::getline(in, line)) {
      if (!split_words(line).empty() && line[0] != '#') labels.push_back(line);
    }
  } else {
    std::set<std::string> all;
    for (const auto& r : data) all.insert(r.gold_relations.begin(), r.gold_relations.end());
    labels.assign(all.begin(), all.end());
  }
  return make_relation_vocab(labels);
}

inline RelationSummary cmd_relations(const std::filesystem::path& dataset, const std::filesystem::path& out_dir,
                                     const RunConfig& config) {
  validate_config(config);
  const auto data = load_relations(dataset);
  const auto base = dataset.parent_path();
  RelationConfig rc;
  rc.colors = config.color_set.empty() ? preset_cps_colors() : resolve_colors(config);
  rc.alpha = config.alpha;
  const auto vocab = load_relation_vocab(config, data);
  auto backend = make_backend(config, rc.colors);

  std::vector<std::optional<RelationScoreTable>> tables(data.size());
  std::vector<std::string> errors(data.size());
  parallel_for(data.size(), config.jobs, [&](std::size_t i) {
    const auto& r = data[i];
    try {
      const auto image = read_png(base / r.image_ref);
      tables[i] = score_relation_pair(*backend, image, r.subject.text, r.subject.box, r.object.text, r.object.box,
                                      vocab, rc, r.meta);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  // Triplets of one image are ranked jointly: score desc, then dataset order
  // of the pair, then label.
  struct Scored {
    double score;
    std::size_t pair;
    Triplet t;
  };
  std::map<std::string, std::vector<Scored>> by_image;
  std::map<std::string, std::set<Triplet>> gold;
  std::vector<std::string> image_order;
  RelationSummary summary;
  summary.instances = data.size();
  std::string lines;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data[i];
    if (!by_image.contains(r.image_ref)) image_order.push_back(r.image_ref);
    auto& scored = by_image[r.image_ref];
    auto& g = gold[r.image_ref];
    for (const auto& rel : r.gold_relations) g.insert({entity_id(r.subject), rel, entity_id(r.object)});
    nlohmann::ordered_json line;
    line["id"] = r.id;
    if (tables[i]) {
      for (const auto& [label, s] : tables[i]->scores) {
        scored.push_back({s, i, {entity_id(r.subject), label, entity_id(r.object)}});
      }
      auto sc = nlohmann::ordered_json::object();
      for (const auto& label : tables[i]->ranked) sc[label] = tables[i]->scores.at(label);
      line["ranked"] = tables[i]->ranked;
      line["scores"] = std::move(sc);
      auto na = nlohmann::ordered_json::object();
      for (const auto& [l, s] : tables[i]->na_scores) na[std::to_string(l)] = s;
      line["na_scores"] = std::move(na);
    } else {
      ++summary.errors;
      line["error"] = errors[i];
    }
    lines += line.dump() + "\n";
  }
  for (const auto& key : image_order) {
    auto& scored = by_image[key];
    std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.pair != b.pair) return a.pair < b.pair;
      return a.t.relation < b.t.relation;
    });
    RankedImage img;
    for (const auto& s : scored) img.ranked.push_back(s.t);
    img.gold = gold[key];
    summary.images.push_back(std::move(img));
  }
  for (auto n : config.recall_at) {
    summary.metrics["R@" + std::to_string(n)] = recall_at_n(summary.images, n);
    summary.metrics["mR@" + std::to_string(n)] = mean_recall_at_n(summary.images, n);
  }

  write_file_atomic(out_dir / "relations.jsonl", lines);
  nlohmann::ordered_json report;
  report["task"] = "relations";
  auto metrics = nlohmann::ordered_json::object();
  for (auto n : config.recall_at) {
    metrics["R@" + std::to_string(n)] = summary.metrics["R@" + std::to_string(n)];
    metrics["mR@" + std::to_string(n)] = summary.metrics["mR@" + std::to_string(n)];
  }
  report["metrics"] = std::move(metrics);
  report["instances"] = summary.instances;
  report["errors"] = summary.errors;
  report["config"] = config_echo(config, rc.colors, 2, backend->backend_id());
  write_file_atomic(out_dir / "report.json", report.dump(2) + "\n");
  return summary;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateSummary {
  MetricReport report;
  std::vector<Split> splits;
};

// For each seeded split, accuracy over the instances outside that split's
// train and validation ids, plus accuracy on the validation ids.
inline EvaluateSummary cmd_evaluate(const std::filesystem::path& predictions, const std::filesystem::path& dataset,
                                    const std::filesystem::path& out_dir, const RunConfig& config) {
  const auto data = load_grounding(dataset);
  const auto preds = load_predictions(predictions);
  std::map<std::string, std::optional<BoundingBox>> by_id;
  for (const auto& p : preds) by_id[p.id] = p.predicted_box;
  std::vector<std::string> pool;
  std::map<std::string, BoundingBox> gold;
  for (const auto& g : data) {
    pool.push_back(g.id);
    gold[g.id] = g.gold_box;
  }
  for (const auto& [id, box] : by_id) {
    if (!gold.contains(id)) throw Error(ErrorKind::kValidation, "prediction for unknown instance '" + id + "'");
  }
  SplitSpec spec{config.shots, config.n_splits, config.seed, config.val_size, false};
  EvaluateSummary out;
  out.splits = sample_splits(pool, spec);
  auto accuracy_over = [&](const std::vector<std::string>& ids) {
    std::vector<GroundingOutcome> outcomes;
    for (const auto& id : ids) {
      auto it = by_id.find(id);
      outcomes.push_back({it == by_id.end() ? std::nullopt : it->second, gold.at(id)});
    }
    return grounding_accuracy(outcomes);
  };
  std::vector<MetricMap> rows;
  for (const auto& s : out.splits) {
    std::set<std::string> held(s.train.begin(), s.train.end());
    held.insert(s.val.begin(), s.val.end());
    std::vector<std::string> eval;
    for (const auto& id : pool) {
      if (!held.contains(id)) eval.push_back(id);
    }
    rows.push_back({{"accuracy", accuracy_over(eval)}, {"val_accuracy", accuracy_over(s.val)}});
  }
  out.report = aggregate(rows);

  nlohmann::ordered_json report;
  report["task"] = "evaluate";
  report["metrics"] = to_json(out.report);
  auto splits = nlohmann::ordered_json::array();
  for (const auto& s : out.splits) {
    nlohmann::ordered_json j;
    j["train"] = s.train;
    j["val"] = s.val;
    splits.push_back(std::move(j));
  }
  report["splits"] = std::move(splits);
  nlohmann::ordered_json cfg;
  cfg["shots"] = config.shots;
  cfg["n_splits"] = config.n_splits;
  cfg["val_size"] = config.val_size;
  cfg["seed"] = config.seed;
  report["config"] = std::move(cfg);
  write_file_atomic(out_dir / "report.json", report.dump(2) + "\n");
  return out;
}

}  // namespace cpt
