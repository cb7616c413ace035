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

#include "scheduler/engine_config.h"

#include "common/errors.h"

namespace grserve {

const char* kv_mode_name(KvMode mode) {
  return mode == KvMode::kPaged ? "paged" : "separated";
}

void EngineConfig::validate() const {
  require(max_tokens_per_batch >= 1, ErrorCode::kConfig,
          "max_tokens_per_batch must be positive");
  require(wait_quota_ms > 0.0, ErrorCode::kConfig,
          "wait_quota_ms must be positive");
  require(num_lanes >= 1, ErrorCode::kConfig, "num_lanes must be >= 1");
  require(slo_p99_ms > 0.0, ErrorCode::kConfig, "slo_p99_ms must be positive");
  require(queue_capacity >= 1, ErrorCode::kConfig,
          "queue_capacity must be positive");
  require(tick_ms > 0.0, ErrorCode::kConfig, "tick_ms must be positive");
  require(launch_overhead_us >= 0.0, ErrorCode::kConfig,
          "launch_overhead_us must be non-negative");
  require(paged_block_size >= 1, ErrorCode::kConfig,
          "paged_block_size must be positive");
  require(attention_lanes == 0 || attention_lanes >= 3, ErrorCode::kConfig,
          "attention_lanes must be 0 or at least 3");
  require(planner_path.empty() || attention_lanes >= 3, ErrorCode::kConfig,
          "planner_path needs attention_lanes >= 3");
}

void to_json(nlohmann::json& j, const EngineConfig& c) {
  j = nlohmann::json{{"max_tokens_per_batch", c.max_tokens_per_batch},
                     {"wait_quota_ms", c.wait_quota_ms},
                     {"num_lanes", c.num_lanes},
                     {"overlap", c.overlap},
                     {"graph_dispatch", c.graph_dispatch},
                     {"slo_p99_ms", c.slo_p99_ms},
                     {"queue_capacity", c.queue_capacity},
                     {"tick_ms", c.tick_ms},
                     {"launch_overhead_us", c.launch_overhead_us},
                     {"kv_mode", kv_mode_name(c.kv_mode)},
                     {"paged_block_size", c.paged_block_size},
                     {"attention_lanes", c.attention_lanes},
                     {"planner_path", c.planner_path}};
}

void from_json(const nlohmann::json& j, EngineConfig& c) {
  require(j.is_object(), ErrorCode::kConfig, "engine config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "max_tokens_per_batch") {
      c.max_tokens_per_batch = value.get<std::size_t>();
    } else if (key == "wait_quota_ms") {
      c.wait_quota_ms = value.get<double>();
    } else if (key == "num_lanes") {
      c.num_lanes = value.get<int>();
    } else if (key == "overlap") {
      c.overlap = value.get<bool>();
    } else if (key == "graph_dispatch") {
      c.graph_dispatch = value.get<bool>();
    } else if (key == "slo_p99_ms") {
      c.slo_p99_ms = value.get<double>();
    } else if (key == "queue_capacity") {
      c.queue_capacity = value.get<std::size_t>();
    } else if (key == "tick_ms") {
      c.tick_ms = value.get<double>();
    } else if (key == "launch_overhead_us") {
      c.launch_overhead_us = value.get<double>();
    } else if (key == "kv_mode") {
      const auto mode = value.get<std::string>();
      require(mode == "separated" || mode == "paged", ErrorCode::kConfig,
              "kv_mode must be 'separated' or 'paged'");
      c.kv_mode = mode == "paged" ? KvMode::kPaged : KvMode::kSeparated;
    } else if (key == "paged_block_size") {
      c.paged_block_size = value.get<std::size_t>();
    } else if (key == "attention_lanes") {
      c.attention_lanes = value.get<int>();
    } else if (key == "planner_path") {
      c.planner_path = value.get<std::string>();
    } else {
      fail(ErrorCode::kConfig, "unknown engine config key '" + key + "'");
    }
  }
}

}  // namespace grserve
