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
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "scheduler/request.h"

namespace grserve {

struct BatchRecord {
  std::uint64_t id = 0;
  int lane = -1;
  std::size_t total_tokens = 0;
  bool oversize = false;
  double head_arrival_us = 0.0;
  double formed_us = 0.0;
  std::vector<std::uint64_t> request_ids;
};

// Everything an engine run produced. Results are ordered by request id.
struct EngineReport {
  std::vector<RequestResult> results;
  std::vector<PhaseSpan> spans;
  std::vector<BatchRecord> batches;
  // Requests refused by backpressure, in submission order.
  std::vector<std::uint64_t> rejected;
  // Set when drain() timed out before every admitted request finished.
  bool partial = false;
  std::uint64_t device_handoffs = 0;
  std::uint64_t planner_calls = 0;

  void sort_results();
};

// One JSON object per line: {request_id, phase, step, start_us, end_us,
// lane}.
void write_trace_jsonl(const std::vector<PhaseSpan>& spans, std::ostream& out);
void write_trace_jsonl(const std::vector<PhaseSpan>& spans,
                       const std::string& path);
std::vector<PhaseSpan> read_trace_jsonl(std::istream& in);

// Per request: last span end minus the queue span start.
std::map<std::uint64_t, double> latencies_from_trace(
    const std::vector<PhaseSpan>& spans);

}  // namespace grserve
