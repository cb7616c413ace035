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

#include "cli/run_config.h"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "common/errors.h"

namespace grserve::cli {

namespace {

bool file_exists(const std::string& path) {
  std::error_code ec;
  return std::filesystem::is_regular_file(path, ec);
}

void studies_from_json(const nlohmann::json& j, StudyConfig& s) {
  require(j.is_object(), ErrorCode::kConfig, "studies must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "sweep_rps") {
      value.get_to(s.sweep_rps);
    } else if (key == "sweep_bw") {
      value.get_to(s.sweep_bw);
    } else if (key == "sweep_paged") {
      value.get_to(s.sweep_paged);
    } else if (key == "memory_bw") {
      value.get_to(s.memory_bw);
    } else if (key == "memory_prompt_len") {
      value.get_to(s.memory_prompt_len);
    } else if (key == "memory_block_size") {
      value.get_to(s.memory_block_size);
    } else if (key == "kernel_shapes") {
      value.get_to(s.kernel_shapes);
    } else if (key == "kernel_repeats") {
      value.get_to(s.kernel_repeats);
    } else if (key == "ablation_lanes") {
      value.get_to(s.ablation_lanes);
    } else {
      fail(ErrorCode::kConfig, "unknown studies key '" + key + "'");
    }
  }
}

nlohmann::json studies_to_json(const StudyConfig& s) {
  return {{"sweep_rps", s.sweep_rps},
          {"sweep_bw", s.sweep_bw},
          {"sweep_paged", s.sweep_paged},
          {"memory_bw", s.memory_bw},
          {"memory_prompt_len", s.memory_prompt_len},
          {"memory_block_size", s.memory_block_size},
          {"kernel_shapes", s.kernel_shapes},
          {"kernel_repeats", s.kernel_repeats},
          {"ablation_lanes", s.ablation_lanes}};
}

// Removes `key` from a copy of `section` and hands it to `take`.
nlohmann::json extract(const nlohmann::json& section, const char* key,
                       const std::function<void(const nlohmann::json&)>& take) {
  require(section.is_object(), ErrorCode::kConfig,
          "config sections must be objects");
  nlohmann::json rest = section;
  if (rest.contains(key)) {
    take(rest.at(key));
    rest.erase(key);
  }
  return rest;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  engine.validate();
  beam.validate(model.vocab_size);
  workload.validate();
  require(vocab_items >= 1, ErrorCode::kConfig, "vocab_items must be positive");
  require(!out_dir.empty(), ErrorCode::kConfig, "output dir must be set");
  const auto positive = [](const std::vector<int>& v) {
    return !v.empty() &&
           std::all_of(v.begin(), v.end(), [](int x) { return x >= 1; });
  };
  require(!studies.sweep_rps.empty() &&
              std::all_of(studies.sweep_rps.begin(), studies.sweep_rps.end(),
                          [](double r) { return r > 0.0; }),
          ErrorCode::kConfig, "sweep_rps must be non-empty and positive");
  require(positive(studies.sweep_bw), ErrorCode::kConfig,
          "sweep_bw must be non-empty and positive");
  require(positive(studies.memory_bw) && positive(studies.memory_prompt_len),
          ErrorCode::kConfig, "memory grids must be non-empty and positive");
  require(studies.memory_block_size >= 1, ErrorCode::kConfig,
          "memory_block_size must be positive");
  require(!studies.kernel_shapes.empty(), ErrorCode::kConfig,
          "kernel_shapes must be non-empty");
  for (const auto& s : studies.kernel_shapes) {
    require(s[0] >= 1 && s[1] >= 1 && s[2] >= 1, ErrorCode::kConfig,
            "kernel shapes need positive bw, prompt_len and batch");
  }
  require(studies.kernel_repeats >= 1, ErrorCode::kConfig,
          "kernel_repeats must be positive");
  require(studies.ablation_lanes >= 2, ErrorCode::kConfig,
          "ablation_lanes must be at least 2");
}

void RunConfig::check_inputs() const {
  if (!vocab_path.empty()) {
    require(file_exists(vocab_path), ErrorCode::kConfig,
            "vocabulary file '" + vocab_path + "' not found");
  }
  if (!weights_path.empty()) {
    require(file_exists(weights_path + ".json") &&
                file_exists(weights_path + ".bin"),
            ErrorCode::kConfig,
            "weights '" + weights_path + ".{json,bin}' not found");
  }
  if (!engine.planner_path.empty()) {
    require(file_exists(engine.planner_path), ErrorCode::kConfig,
            "planner file '" + engine.planner_path + "' not found");
  }
  if (!workload.prompts_path.empty()) {
    require(file_exists(workload.prompts_path), ErrorCode::kConfig,
            "prompt file '" + workload.prompts_path + "' not found");
  }
}

RequestParams RunConfig::request_params() const {
  RequestParams p;
  p.beam_width = beam.beam_width;
  p.top_k = beam.top_k;
  p.decode_steps = beam.decode_steps;
  p.masking = beam.masking;
  return p;
}

BenchSetup RunConfig::bench_setup(
    std::shared_ptr<const Weights> weights,
    std::shared_ptr<const ItemVocabulary> vocab) const {
  BenchSetup s;
  s.engine = engine;
  s.params = request_params();
  s.workload = workload;
  s.costs = costs;
  s.virtual_time = virtual_time;
  s.weights = std::move(weights);
  s.vocab = std::move(vocab);
  return s;
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json model = c.model;
  model["weights_path"] = c.weights_path;
  nlohmann::json beam = c.beam;
  beam["vocab_path"] = c.vocab_path;
  beam["vocab_items"] = c.vocab_items;
  return {{"model", model},
          {"engine", c.engine},
          {"beam", beam},
          {"workload", c.workload},
          {"costs", c.costs},
          {"studies", studies_to_json(c.studies)},
          {"output", {{"dir", c.out_dir}, {"virtual_time", c.virtual_time}}}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  require(j.is_object(), ErrorCode::kConfig, "config must be a JSON object");
  RunConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "model") {
        extract(value, "weights_path", [&](const nlohmann::json& v) {
          v.get_to(c.weights_path);
        }).get_to(c.model);
      } else if (key == "engine") {
        value.get_to(c.engine);
      } else if (key == "beam") {
        auto rest = extract(value, "vocab_path", [&](const nlohmann::json& v) {
          v.get_to(c.vocab_path);
        });
        extract(rest, "vocab_items", [&](const nlohmann::json& v) {
          v.get_to(c.vocab_items);
        }).get_to(c.beam);
      } else if (key == "workload") {
        value.get_to(c.workload);
      } else if (key == "costs") {
        value.get_to(c.costs);
      } else if (key == "studies") {
        studies_from_json(value, c.studies);
      } else if (key == "output") {
        require(value.is_object(), ErrorCode::kConfig,
                "output must be an object");
        for (const auto& [okey, ovalue] : value.items()) {
          if (okey == "dir") {
            ovalue.get_to(c.out_dir);
          } else if (okey == "virtual_time") {
            ovalue.get_to(c.virtual_time);
          } else {
            fail(ErrorCode::kConfig, "unknown output key '" + okey + "'");
          }
        }
      } else {
        fail(ErrorCode::kConfig, "unknown config section '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("bad config value: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kConfig,
          "cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig,
         "config file '" + path + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

void apply_environment(RunConfig& c) {
  if (const char* out = std::getenv("GRSERVE_OUT"); out && *out) {
    c.out_dir = out;
  }
  if (const char* cap = std::getenv("GRSERVE_MAX_THREADS"); cap && *cap) {
    int limit = 0;
    try {
      limit = std::stoi(cap);
    } catch (const std::exception&) {
      limit = 0;
    }
    require(limit >= 1, ErrorCode::kConfig,
            "GRSERVE_MAX_THREADS must be a positive integer");
    c.engine.num_lanes = std::min(c.engine.num_lanes, limit);
    c.studies.ablation_lanes =
        std::max(2, std::min(c.studies.ablation_lanes, limit));
    if (c.engine.attention_lanes > limit) {
      c.engine.attention_lanes = limit >= 3 ? limit : 0;
      if (c.engine.attention_lanes == 0) {
        c.engine.planner_path.clear();
      }
    }
  }
}

RunConfig resolve_run_config(const std::string& config_path,
                             const Overrides& o) {
  RunConfig c = config_path.empty() ? RunConfig{} : load_run_config(config_path);
  apply_environment(c);
  if (!o.out_dir.empty()) {
    c.out_dir = o.out_dir;
  }
  if (o.seed) {
    c.workload.seed = *o.seed;
  }
  c.virtual_time = c.virtual_time || o.virtual_time;
  if (o.bw) {
    c.beam.beam_width = *o.bw;
    c.studies.sweep_bw = {*o.bw};
    c.studies.memory_bw = {*o.bw};
  }
  if (o.k) {
    c.beam.top_k = *o.k;
  }
  if (o.nd) {
    c.beam.decode_steps = *o.nd;
  }
  if (o.rps) {
    c.workload.rps = *o.rps;
    c.studies.sweep_rps = {*o.rps};
  }
  if (o.duration) {
    c.workload.duration_s = *o.duration;
  }
  if (o.lanes) {
    c.engine.num_lanes = *o.lanes;
  }
  if (o.masking) {
    c.beam.masking = *o.masking;
  }
  if (o.overlap) {
    c.engine.overlap = *o.overlap;
  }
  if (o.no_paged) {
    c.studies.sweep_paged = false;
  }
  return c;
}

std::shared_ptr<const Weights> load_model(const RunConfig& c) {
  if (!c.weights_path.empty()) {
    auto w = std::make_shared<const Weights>(load_weights(c.weights_path));
    require(w->config.vocab_size == c.model.vocab_size, ErrorCode::kConfig,
            "loaded weights disagree with model.vocab_size");
    return w;
  }
  return std::make_shared<const Weights>(init_weights(c.model));
}

std::shared_ptr<const ItemVocabulary> load_items(const RunConfig& c) {
  if (!c.vocab_path.empty()) {
    return std::make_shared<const ItemVocabulary>(load_vocabulary(
        c.vocab_path, c.beam.decode_steps, c.model.vocab_size));
  }
  return std::make_shared<const ItemVocabulary>(random_vocabulary(
      c.beam.decode_steps, c.model.vocab_size, c.vocab_items,
      c.workload.seed));
}

}  // namespace grserve::cli
