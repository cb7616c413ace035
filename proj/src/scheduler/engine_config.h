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

#include <cstddef>
#include <string>

#include <json.hpp>

namespace grserve {

// Which KV layout decode runs against.
enum class KvMode { kSeparated, kPaged };

const char* kv_mode_name(KvMode mode);

struct EngineConfig {
  std::size_t max_tokens_per_batch = 4096;
  double wait_quota_ms = 5.0;
  int num_lanes = 1;
  // Mask preparation for the next level runs while the forward executes.
  bool overlap = true;
  // One device handoff per phase instead of one per request and layer.
  bool graph_dispatch = true;
  double slo_p99_ms = 200.0;
  // Admitted but not yet batched requests; beyond this submit rejects.
  std::size_t queue_capacity = 100000;
  // Polling granularity of the batch former.
  double tick_ms = 1.0;
  // Fixed cost charged to every device handoff.
  double launch_overhead_us = 20.0;
  KvMode kv_mode = KvMode::kSeparated;
  std::size_t paged_block_size = 16;
  // Lanes for the stages of one decode attention call; 0 runs the stages
  // inline, otherwise at least 3.
  int attention_lanes = 0;
  // Trained planner JSON choosing the lane split; empty uses the work
  // proportional heuristic.
  std::string planner_path;

  void validate() const;
  double wait_quota_us() const { return wait_quota_ms * 1000.0; }
  double tick_us() const { return tick_ms * 1000.0; }
  bool operator==(const EngineConfig&) const = default;
};

void to_json(nlohmann::json& j, const EngineConfig& c);
// Unknown keys are rejected; missing keys keep their defaults.
void from_json(const nlohmann::json& j, EngineConfig& c);

}  // namespace grserve
