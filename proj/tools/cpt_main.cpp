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


#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cpt/cpt.hpp"

namespace {

void add_common(CLI::App* cmd, cpt::RunConfig& c) {
  cmd->add_option("--mode", c.mode, "single | toolkit")->capture_default_str();
  cmd->add_option("--colors", c.color_set, "preset name (cps, freq, default) or color file");
  cmd->add_option("--alpha", c.alpha, "transparency in (0,1)")->capture_default_str();
  cmd->add_option("--capacity", c.capacity, "region batch capacity (0 = mode default)");
  cmd->add_option("--overlap", c.overlap_threshold, "IoU threshold for co-batching")->capture_default_str();
  cmd->add_option("--shape", c.shape, "block | mask")->capture_default_str();
  cmd->add_option("--backend", c.backend, "oracle | stub | planted:FILE | remote | http://host:port")
      ->capture_default_str();
  cmd->add_option("--color-table", c.color_table, "named colors used by the oracle");
  cmd->add_option("--seed", c.seed)->capture_default_str();
  cmd->add_option("--shots", c.shots, "K training shots per split")->capture_default_str();
  cmd->add_option("--splits", c.n_splits)->capture_default_str();
  cmd->add_option("--val-size", c.val_size)->capture_default_str();
  cmd->add_option("--probe", c.probe_variant, "of | in")->capture_default_str();
  cmd->add_option("--jobs", c.jobs, "worker threads")->capture_default_str();
  cmd->add_option("--retries", c.retries, "remote attempts")->capture_default_str();
  cmd->add_option("--backoff-ms", c.backoff_ms)->capture_default_str();
  cmd->add_option("--timeout-ms", c.timeout_ms)->capture_default_str();
}

int report_error(const std::exception& e, int code) {
  std::cerr << "cpt: " << e.what() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Colorful cross-modal prompt tuning toolkit"};
  app.set_config("--config", "", "TOML-style key = value file; flags override it");
  app.require_subcommand(1);
  cpt::RunConfig config;
  std::string dataset, out_dir, predictions;

  auto* colorize = app.add_subcommand("colorize", "write colored proposal images per batch");
  colorize->add_option("dataset", dataset, "grounding JSONL")->required();
  colorize->add_option("out", out_dir)->required();
  add_common(colorize, config);

  auto* search = app.add_subcommand("search-colors", "probe candidate colors and select a color set");
  search->add_option("candidates", dataset, "name<TAB>r,g,b file")->required();
  search->add_option("out", out_dir)->required();
  search->add_option("--grid-radius", config.grid_radius)->capture_default_str();
  search->add_option("--grid-step", config.grid_step)->capture_default_str();
  search->add_option("--threshold", config.discard_threshold, "discard threshold")->capture_default_str();
  search->add_option("--block-size", config.block_size)->capture_default_str();
  search->add_flag("--resume", config.resume, "reuse a persisted score matrix");
  search->add_option("--select-on", config.select_on, "validation JSONL used to pick one color");
  add_common(search, config);

  auto* ground = app.add_subcommand("ground", "referring expression comprehension");
  ground->add_option("dataset", dataset)->required();
  ground->add_option("out", out_dir)->required();
  add_common(ground, config);

  auto* relations = app.add_subcommand("relations", "relation scoring with R@N and mR@N");
  relations->add_option("dataset", dataset)->required();
  relations->add_option("out", out_dir)->required();
  relations->add_option("--vocab", config.relation_vocab, "one relation label per line");
  relations->add_option("--recall-at", config.recall_at)->delimiter(',');
  add_common(relations, config);

  auto* evaluate = app.add_subcommand("evaluate", "few-shot split evaluation of predictions");
  evaluate->add_option("predictions", predictions)->required();
  evaluate->add_option("dataset", dataset)->required();
  evaluate->add_option("out", out_dir)->required();
  add_common(evaluate, config);

  int scenes = 50, max_proposals = 6;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "write a synthetic grounding dataset for the oracle backend");
  synth->add_option("out", out_dir)->required();
  synth->add_option("--scenes", scenes)->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--max-proposals", max_proposals)->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*colorize) {
      auto s = cpt::cmd_colorize(dataset, out_dir, config);
      std::cout << "images: " << s.images_written << "\n";
    } else if (*search) {
      auto s = cpt::cmd_search_colors(dataset, out_dir, config);
      std::cout << cpt::format_color_records(s.colors);
      if (s.selected) std::cout << "selected: " << s.selected->text.str() << "\n";
    } else if (*ground) {
      auto s = cpt::cmd_ground(dataset, out_dir, config);
      std::printf("accuracy: %.4f (%zu instances, %zu errors)\n", s.accuracy, s.instances, s.errors);
    } else if (*relations) {
      auto s = cpt::cmd_relations(dataset, out_dir, config);
      for (const auto& [k, v] : s.metrics) std::printf("%s: %.4f\n", k.c_str(), v);
    } else if (*evaluate) {
      auto s = cpt::cmd_evaluate(predictions, dataset, out_dir, config);
      std::cout << cpt::format_report(s.report);
    } else if (*synth) {
      cpt::write_synthetic(out_dir, cpt::generate_synthetic_grounding(scenes, max_proposals, synth_seed));
      std::cout << "scenes: " << scenes << "\n";
    }
  } catch (const cpt::Error& e) {
    return report_error(e, cpt::exit_code_for(e));
  } catch (const std::exception& e) {
    return report_error(e, cpt::kExitValidation);
  }
  return cpt::kExitOk;
}
