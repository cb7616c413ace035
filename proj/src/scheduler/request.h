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

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "beam/beam_pool.h"
#include "beam/selection.h"
#include "kvcache/memory_stats.h"

namespace grserve {

// Per-request search parameters. Requests share a batch only when these
// match exactly.
struct RequestParams {
  int beam_width = 8;
  int top_k = 8;
  int decode_steps = 3;
  bool masking = true;

  bool operator==(const RequestParams&) const = default;
};

struct Request {
  std::uint64_t id = 0;
  std::vector<int> prompt;
  // Microseconds on the engine clock. Negative means "stamp on submit".
  double arrival_us = -1.0;
  RequestParams params;

  std::size_t tokens() const noexcept { return prompt.size(); }
};

struct Batch {
  std::uint64_t id = 0;
  std::vector<Request> requests;
  std::size_t total_tokens = 0;
  double formed_us = 0.0;
  // A single request whose prompt alone exceeds the batch capacity.
  bool oversize = false;
};

enum class Phase { kQueue, kDispatch, kPrefill, kBeam, kMask, kDecode };

const char* phase_name(Phase phase);
Phase phase_from_name(const std::string& name);

// One timed span of one request. `step` is the beam level for beam, mask
// and decode spans and -1 otherwise.
struct PhaseSpan {
  std::uint64_t request_id = 0;
  Phase phase = Phase::kQueue;
  int step = -1;
  double start_us = 0.0;
  double end_us = 0.0;
  int lane = -1;

  bool operator==(const PhaseSpan&) const = default;
};

void to_json(nlohmann::json& j, const PhaseSpan& s);
void from_json(const nlohmann::json& j, PhaseSpan& s);

struct RequestResult {
  std::uint64_t id = 0;
  std::uint64_t batch_id = 0;
  int lane = -1;
  RequestParams params;
  std::size_t prompt_len = 0;
  double arrival_us = 0.0;
  double completion_us = 0.0;
  bool failed = false;
  std::string error;
  std::vector<FinalItem> items;
  // Live beams after the last level; below beam_width for under-full pools.
  int live_beams = 0;
  // Emitted items that are not in the vocabulary.
  int invalid_items = 0;
  MemoryStats memory;
  SelectionStats selection;

  double latency_us() const noexcept { return completion_us - arrival_us; }
};

}  // namespace grserve
