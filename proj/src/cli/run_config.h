/* Copyright 2026 The grserve Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "beam/beam_search.h"
#include "beam/vocabulary.h"
#include "bench/studies.h"
#include "bench/workload.h"
#include "model/model_config.h"
#include "model/weights.h"
#include "scheduler/engine_config.h"
#include "scheduler/virtual_engine.h"

namespace grserve::cli {

// Grids and knobs of the individual studies.
struct StudyConfig {
  std::vector<double> sweep_rps{2.0, 4.0};
  std::vector<int> sweep_bw{128, 256, 512};
  bool sweep_paged = true;
  std::vector<int> memory_bw{128, 256, 512};
  std::vector<int> memory_prompt_len{100, 1000, 3000};
  std::size_t memory_block_size = 16;
  // (bw, prompt_len, batch) triples.
  std::vector<std::array<int, 3>> kernel_shapes{
      {1, 1000, 1}, {128, 1000, 1}, {256, 1000, 1}, {512, 1000, 1},
      {512, 100, 4}};
  int kernel_repeats = 5;
  int ablation_lanes = 4;
  bool operator==(const StudyConfig&) const = default;
};

// The merged configuration of one CLI invocation. Precedence, highest
// first: command-line flags, environment (GRSERVE_OUT, GRSERVE_MAX_THREADS),
// config file, built-in defaults.
struct RunConfig {
  ModelConfig model;
  // Prefix of saved weights; empty draws them from model.seed.
  std::string weights_path;
  EngineConfig engine;
  BeamConfig beam;
  // Item file; empty synthesizes vocab_items random items.
  std::string vocab_path;
  std::size_t vocab_items = 5000;
  WorkloadSpec workload;
  CostModel costs;
  StudyConfig studies;
  std::string out_dir = "out";
  bool virtual_time = false;

  // Everything except file existence, which check_inputs() covers.
  void validate() const;
  // Raises a config error for a missing vocabulary, weights or planner
  // file. Called before any engine starts or output is written.
  void check_inputs() const;
  RequestParams request_params() const;
  BenchSetup bench_setup(std::shared_ptr<const Weights> weights,
                         std::shared_ptr<const ItemVocabulary> vocab) const;
};

nlohmann::json to_json(const RunConfig& c);
// Sections: model, engine, beam, workload, costs, studies, output. Unknown
// keys anywhere raise a config error, as do type mismatches.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// Applies GRSERVE_OUT and GRSERVE_MAX_THREADS when set.
void apply_environment(RunConfig& c);

// Command-line values; unset fields leave the configuration unchanged. A
// beam width or rps replaces the corresponding sweep grid.
struct Overrides {
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool virtual_time = false;
  std::optional<int> bw;
  std::optional<int> k;
  std::optional<int> nd;
  std::optional<double> rps;
  std::optional<double> duration;
  std::optional<int> lanes;
  std::optional<bool> masking;
  std::optional<bool> overlap;
  bool no_paged = false;
};

// Defaults or the file at `config_path` (when non-empty), then the
// environment, then `o`.
RunConfig resolve_run_config(const std::string& config_path,
                             const Overrides& o);

std::shared_ptr<const Weights> load_model(const RunConfig& c);
// Masked runs need a vocabulary of depth nd; unmasked runs still use it to
// flag invalid items.
std::shared_ptr<const ItemVocabulary> load_items(const RunConfig& c);

}  // namespace grserve::cli
