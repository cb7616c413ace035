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

#include "scheduler/request.h"

#include <array>

#include "common/errors.h"

namespace grserve {
namespace {

constexpr std::array<std::pair<Phase, const char*>, 6> kPhaseNames{{
    {Phase::kQueue, "queue"},
    {Phase::kDispatch, "dispatch"},
    {Phase::kPrefill, "prefill"},
    {Phase::kBeam, "beam"},
    {Phase::kMask, "mask"},
    {Phase::kDecode, "decode"},
}};

}  // namespace

const char* phase_name(Phase phase) {
  for (const auto& [p, name] : kPhaseNames) {
    if (p == phase) {
      return name;
    }
  }
  return "unknown";
}

Phase phase_from_name(const std::string& name) {
  for (const auto& [p, n] : kPhaseNames) {
    if (name == n) {
      return p;
    }
  }
  fail(ErrorCode::kInput, "unknown phase '" + name + "'");
}

void to_json(nlohmann::json& j, const PhaseSpan& s) {
  j = nlohmann::json{{"request_id", s.request_id},
                     {"phase", phase_name(s.phase)},
                     {"step", s.step},
                     {"start_us", s.start_us},
                     {"end_us", s.end_us},
                     {"lane", s.lane}};
}

void from_json(const nlohmann::json& j, PhaseSpan& s) {
  s.request_id = j.at("request_id").get<std::uint64_t>();
  s.phase = phase_from_name(j.at("phase").get<std::string>());
  s.step = j.value("step", -1);
  s.start_us = j.at("start_us").get<double>();
  s.end_us = j.at("end_us").get<double>();
  s.lane = j.at("lane").get<int>();
}

}  // namespace grserve
