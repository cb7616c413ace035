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

#include <memory>
#include <vector>

#include <json.hpp>

#include "beam/vocabulary.h"
#include "model/weights.h"
#include "scheduler/engine_config.h"
#include "scheduler/report.h"

namespace grserve {

// Synthetic per-operation costs in microseconds for the virtual-time
// engine. Device phases cost a launch per handoff plus the per-request
// terms; host phases cost only their per-request terms.
struct CostModel {
  double prefill_fixed_us = 100.0;
  double prefill_per_token_us = 2.0;
  double decode_fixed_us = 50.0;
  double decode_per_beam_us = 1.0;
  // Shared-prefix attention: once per request in the separated layout, once
  // per beam in the paged layout.
  double attend_per_prompt_token_us = 0.02;
  double attend_per_generated_token_us = 0.02;
  double select_per_candidate_us = 0.002;
  double mask_per_beam_us = 0.5;

  bool operator==(const CostModel&) const = default;
};

void to_json(nlohmann::json& j, const CostModel& c);
void from_json(const nlohmann::json& j, CostModel& c);

// Discrete-event simulation of the engine on a virtual clock: the same
// BatchFormer and LaneSelector policies, evaluated at tick boundaries, with
// phase durations from a CostModel. Runs are deterministic.
//
// With weights the batches are also executed for real (one BatchRunner
// per lane) so results carry items; timings still come from the cost
// model. Without weights only the schedule is simulated.
class VirtualEngine {
 public:
  VirtualEngine(const EngineConfig& config, const CostModel& costs,
                std::shared_ptr<const Weights> weights = nullptr,
                std::shared_ptr<const ItemVocabulary> vocab = nullptr,
                int layers_for_costs = 2);

  // Every request must carry its arrival time. Queue overflow at arrival
  // rejects the request as the wall-clock engine would.
  EngineReport run(std::vector<Request> requests);

 private:
  EngineConfig config_;
  CostModel costs_;
  std::shared_ptr<const Weights> weights_;
  std::shared_ptr<const ItemVocabulary> vocab_;
  int layers_;
};

}  // namespace grserve
