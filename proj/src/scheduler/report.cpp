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

#include "scheduler/report.h"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "common/errors.h"

namespace grserve {

void EngineReport::sort_results() {
  std::sort(results.begin(), results.end(),
            [](const RequestResult& a, const RequestResult& b) {
              return a.id < b.id;
            });
}

void write_trace_jsonl(const std::vector<PhaseSpan>& spans,
                       std::ostream& out) {
  for (const PhaseSpan& s : spans) {
    out << nlohmann::json(s).dump() << '\n';
  }
}

void write_trace_jsonl(const std::vector<PhaseSpan>& spans,
                       const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write trace file " + path);
  write_trace_jsonl(spans, out);
}

std::vector<PhaseSpan> read_trace_jsonl(std::istream& in) {
  std::vector<PhaseSpan> spans;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    spans.push_back(nlohmann::json::parse(line).get<PhaseSpan>());
  }
  return spans;
}

std::map<std::uint64_t, double> latencies_from_trace(
    const std::vector<PhaseSpan>& spans) {
  std::map<std::uint64_t, std::pair<double, double>> bounds;
  for (const PhaseSpan& s : spans) {
    auto [it, fresh] = bounds.try_emplace(s.request_id, s.start_us, s.end_us);
    if (s.phase == Phase::kQueue) {
      it->second.first = s.start_us;
    }
    it->second.second = std::max(it->second.second, s.end_us);
  }
  std::map<std::uint64_t, double> out;
  for (const auto& [id, b] : bounds) {
    out[id] = b.second - b.first;
  }
  return out;
}

}  // namespace grserve
