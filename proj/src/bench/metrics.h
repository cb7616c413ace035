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
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "beam/selection.h"
#include "kvcache/memory_stats.h"
#include "scheduler/report.h"

namespace grserve {

// Nearest rank: the value at 1-based index ceil(p/100 * n) of the sorted
// sample (index 1 for p = 0). Empty samples and p outside [0, 100] raise
// an input error.
double percentile(std::span<const double> values, double p);

struct MetricsReport {
  std::size_t requests = 0;  // completed successfully
  std::size_t failed = 0;
  std::size_t rejected = 0;
  double avg_ms = 0.0;
  double p50_ms = 0.0;
  double p99_ms = 0.0;
  double throughput_rps = 0.0;
  double offered_rps = 0.0;
  double invalid_rate = 0.0;
  double slo_p99_ms = 0.0;
  bool slo_met = false;
  // Component-wise peak over requests.
  MemoryStats memory;
  // Mean milliseconds per completed request, keyed by phase name.
  std::map<std::string, double> phase_ms;
  SelectionStats selection;
  std::uint64_t device_handoffs = 0;
  std::uint64_t planner_calls = 0;

  bool operator==(const MetricsReport&) const = default;
};

void to_json(nlohmann::json& j, const MetricsReport& m);
void from_json(const nlohmann::json& j, MetricsReport& m);

// `duration_s` is the workload window; throughput divides completions by
// the later of that window and the last completion, and offered load is
// the submitted count over the window.
MetricsReport summarize(const EngineReport& report, double duration_s,
                        double slo_p99_ms);

// One measured configuration point.
struct PointConfig {
  double rps = 0.0;
  int bw = 0;
  int k = 0;
  int nd = 0;
  int lanes = 0;
  bool masking = false;
  bool overlap = false;
  bool graph_dispatch = false;
  std::string kv_mode = "separated";
  bool operator==(const PointConfig&) const = default;
};

struct BenchRow {
  PointConfig config;
  MetricsReport metrics;
  bool operator==(const BenchRow&) const = default;
};

void to_json(nlohmann::json& j, const PointConfig& c);
void from_json(const nlohmann::json& j, PointConfig& c);
void to_json(nlohmann::json& j, const BenchRow& r);
void from_json(const nlohmann::json& j, BenchRow& r);

// A study's rows plus the fully resolved configuration that produced them.
struct BenchTable {
  std::string study;
  nlohmann::json config = nlohmann::json::object();
  std::vector<BenchRow> rows;
  bool operator==(const BenchTable&) const = default;
};

void to_json(nlohmann::json& j, const BenchTable& t);
void from_json(const nlohmann::json& j, BenchTable& t);

// rps,bw,k,nd,lanes,masking,overlap then avg_ms,p50_ms,p99_ms,
// throughput_rps,invalid_rate,shared_slots,unshared_slots,baseline_slots,
// block_copies. With graph_dispatch_column, a graph_dispatch column
// follows overlap.
std::vector<std::string> csv_columns(bool graph_dispatch_column = false);
void write_csv(const std::vector<BenchRow>& rows, std::ostream& out,
               bool graph_dispatch_column = false);
void write_csv(const std::vector<BenchRow>& rows, const std::string& path,
               bool graph_dispatch_column = false);
void write_json(const BenchTable& table, const std::string& path);
BenchTable read_json(const std::string& path);

}  // namespace grserve
