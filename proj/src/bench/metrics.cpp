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

#include "bench/metrics.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "common/errors.h"

namespace grserve {

double percentile(std::span<const double> values, double p) {
  require(!values.empty(), ErrorCode::kInput, "percentile of an empty sample");
  require(p >= 0.0 && p <= 100.0, ErrorCode::kInput,
          "percentile p must lie in [0, 100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  // Rounding guard: 99/100 * 100 must give rank 99, not 100.
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

void to_json(nlohmann::json& j, const MetricsReport& m) {
  j = nlohmann::json{
      {"requests", m.requests},
      {"failed", m.failed},
      {"rejected", m.rejected},
      {"avg_ms", m.avg_ms},
      {"p50_ms", m.p50_ms},
      {"p99_ms", m.p99_ms},
      {"throughput_rps", m.throughput_rps},
      {"offered_rps", m.offered_rps},
      {"invalid_rate", m.invalid_rate},
      {"slo_p99_ms", m.slo_p99_ms},
      {"slo_met", m.slo_met},
      {"memory", m.memory},
      {"phase_ms", m.phase_ms},
      {"selection",
       {{"visited", m.selection.visited},
        {"comparisons", m.selection.comparisons},
        {"skipped", m.selection.skipped},
        {"unsound_skips", m.selection.unsound_skips}}},
      {"device_handoffs", m.device_handoffs},
      {"planner_calls", m.planner_calls}};
}

void from_json(const nlohmann::json& j, MetricsReport& m) {
  j.at("requests").get_to(m.requests);
  j.at("failed").get_to(m.failed);
  j.at("rejected").get_to(m.rejected);
  j.at("avg_ms").get_to(m.avg_ms);
  j.at("p50_ms").get_to(m.p50_ms);
  j.at("p99_ms").get_to(m.p99_ms);
  j.at("throughput_rps").get_to(m.throughput_rps);
  j.at("offered_rps").get_to(m.offered_rps);
  j.at("invalid_rate").get_to(m.invalid_rate);
  j.at("slo_p99_ms").get_to(m.slo_p99_ms);
  j.at("slo_met").get_to(m.slo_met);
  j.at("memory").get_to(m.memory);
  j.at("phase_ms").get_to(m.phase_ms);
  const auto& s = j.at("selection");
  s.at("visited").get_to(m.selection.visited);
  s.at("comparisons").get_to(m.selection.comparisons);
  s.at("skipped").get_to(m.selection.skipped);
  s.at("unsound_skips").get_to(m.selection.unsound_skips);
  j.at("device_handoffs").get_to(m.device_handoffs);
  j.at("planner_calls").get_to(m.planner_calls);
}

MetricsReport summarize(const EngineReport& report, double duration_s,
                        double slo_p99_ms) {
  require(duration_s > 0.0, ErrorCode::kInput, "duration must be positive");
  MetricsReport m;
  m.rejected = report.rejected.size();
  m.slo_p99_ms = slo_p99_ms;
  m.device_handoffs = report.device_handoffs;
  m.planner_calls = report.planner_calls;

  std::vector<double> latencies_ms;
  double last_completion_us = 0.0;
  std::uint64_t items = 0;
  std::uint64_t invalid = 0;
  for (const auto& r : report.results) {
    m.memory.absorb(r.memory);
    m.selection.visited += r.selection.visited;
    m.selection.comparisons += r.selection.comparisons;
    m.selection.skipped += r.selection.skipped;
    m.selection.unsound_skips += r.selection.unsound_skips;
    if (r.failed) {
      ++m.failed;
      continue;
    }
    latencies_ms.push_back(r.latency_us() / 1000.0);
    last_completion_us = std::max(last_completion_us, r.completion_us);
    items += r.items.size();
    invalid += static_cast<std::uint64_t>(r.invalid_items);
  }
  m.requests = latencies_ms.size();
  const std::size_t submitted = report.results.size() + m.rejected;
  m.offered_rps = static_cast<double>(submitted) / duration_s;
  if (!latencies_ms.empty()) {
    double sum = 0.0;
    for (double v : latencies_ms) {
      sum += v;
    }
    m.avg_ms = sum / static_cast<double>(latencies_ms.size());
    m.p50_ms = percentile(latencies_ms, 50.0);
    m.p99_ms = percentile(latencies_ms, 99.0);
    m.throughput_rps = static_cast<double>(m.requests) /
                       std::max(duration_s, last_completion_us / 1e6);
  }
  m.invalid_rate =
      items == 0 ? 0.0
                 : static_cast<double>(invalid) / static_cast<double>(items);
  m.slo_met = m.requests > 0 && m.failed == 0 && m.rejected == 0 &&
              m.p99_ms <= slo_p99_ms;

  std::map<std::string, double> phase_us;
  for (const auto& s : report.spans) {
    phase_us[phase_name(s.phase)] += s.end_us - s.start_us;
  }
  const double per_request =
      report.results.empty() ? 1.0 : static_cast<double>(report.results.size());
  for (const auto& [name, us] : phase_us) {
    m.phase_ms[name] = us / 1000.0 / per_request;
  }
  return m;
}

void to_json(nlohmann::json& j, const PointConfig& c) {
  j = nlohmann::json{{"rps", c.rps},
                     {"bw", c.bw},
                     {"k", c.k},
                     {"nd", c.nd},
                     {"lanes", c.lanes},
                     {"masking", c.masking},
                     {"overlap", c.overlap},
                     {"graph_dispatch", c.graph_dispatch},
                     {"kv_mode", c.kv_mode}};
}

void from_json(const nlohmann::json& j, PointConfig& c) {
  j.at("rps").get_to(c.rps);
  j.at("bw").get_to(c.bw);
  j.at("k").get_to(c.k);
  j.at("nd").get_to(c.nd);
  j.at("lanes").get_to(c.lanes);
  j.at("masking").get_to(c.masking);
  j.at("overlap").get_to(c.overlap);
  j.at("graph_dispatch").get_to(c.graph_dispatch);
  j.at("kv_mode").get_to(c.kv_mode);
}

void to_json(nlohmann::json& j, const BenchRow& r) {
  j = nlohmann::json{{"config", r.config}, {"metrics", r.metrics}};
}

void from_json(const nlohmann::json& j, BenchRow& r) {
  j.at("config").get_to(r.config);
  j.at("metrics").get_to(r.metrics);
}

void to_json(nlohmann::json& j, const BenchTable& t) {
  j = nlohmann::json{{"study", t.study}, {"config", t.config},
                     {"rows", t.rows}};
}

void from_json(const nlohmann::json& j, BenchTable& t) {
  j.at("study").get_to(t.study);
  t.config = j.at("config");
  j.at("rows").get_to(t.rows);
}

std::vector<std::string> csv_columns(bool graph_dispatch_column) {
  std::vector<std::string> cols{"rps", "bw", "k", "nd", "lanes", "masking",
                                "overlap"};
  if (graph_dispatch_column) {
    cols.push_back("graph_dispatch");
  }
  for (const char* c :
       {"avg_ms", "p50_ms", "p99_ms", "throughput_rps", "invalid_rate",
        "shared_slots", "unshared_slots", "baseline_slots", "block_copies"}) {
    cols.push_back(c);
  }
  return cols;
}

void write_csv(const std::vector<BenchRow>& rows, std::ostream& out,
               bool graph_dispatch_column) {
  const auto cols = csv_columns(graph_dispatch_column);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    out << (i ? "," : "") << cols[i];
  }
  out << '\n';
  const auto flags = out.flags();
  out << std::setprecision(10);
  for (const auto& row : rows) {
    const auto& c = row.config;
    const auto& m = row.metrics;
    out << c.rps << ',' << c.bw << ',' << c.k << ',' << c.nd << ','
        << c.lanes << ',' << int{c.masking} << ',' << int{c.overlap};
    if (graph_dispatch_column) {
      out << ',' << int{c.graph_dispatch};
    }
    out << ',' << m.avg_ms << ',' << m.p50_ms << ',' << m.p99_ms << ','
        << m.throughput_rps << ',' << m.invalid_rate << ','
        << m.memory.shared_token_slots << ','
        << m.memory.unshared_token_slots << ','
        << m.memory.baseline_token_slots << ',' << m.memory.block_copies
        << '\n';
  }
  out.flags(flags);
}

void write_csv(const std::vector<BenchRow>& rows, const std::string& path,
               bool graph_dispatch_column) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write '" + path + "'");
  write_csv(rows, out, graph_dispatch_column);
  require(out.good(), ErrorCode::kIo, "failed writing '" + path + "'");
}

void write_json(const BenchTable& table, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write '" + path + "'");
  out << nlohmann::json(table).dump(2) << '\n';
  require(out.good(), ErrorCode::kIo, "failed writing '" + path + "'");
}

BenchTable read_json(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in).get<BenchTable>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInput, "malformed report '" + path + "': " + e.what());
  }
}

}  // namespace grserve
