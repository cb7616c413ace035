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
#include <map>
#include <memory>
#include <vector>

#include "attention/planner.h"
#include "bench/metrics.h"
#include "bench/workload.h"
#include "beam/vocabulary.h"
#include "model/weights.h"
#include "scheduler/engine_config.h"
#include "scheduler/report.h"
#include "scheduler/virtual_engine.h"

namespace grserve {

// Everything one measured run needs. Wall-clock runs require weights; a
// virtual-time run without weights simulates the schedule only and emits
// no items.
struct BenchSetup {
  EngineConfig engine;
  RequestParams params;
  WorkloadSpec workload;
  CostModel costs;
  bool virtual_time = false;
  std::shared_ptr<const Weights> weights;
  std::shared_ptr<const ItemVocabulary> vocab;
};

struct PointRun {
  PointConfig config;
  EngineReport report;
  MetricsReport metrics;
};

PointConfig point_config(const BenchSetup& setup);

// Generates the workload, runs it on the configured engine and summarizes.
// Wall-clock runs replay arrivals in real time.
PointRun run_point(const BenchSetup& setup);

using ItemsById = std::map<std::uint64_t, std::vector<FinalItem>>;
ItemsById items_by_request(const EngineReport& report);

struct SweepOptions {
  std::vector<double> rps{5.0, 10.0};
  std::vector<int> beam_widths{128, 256, 512};
  bool include_paged = true;
};

struct SweepResult {
  std::vector<PointRun> separated;
  std::vector<PointRun> paged;  // empty unless requested
};

// One point per (beam width, rps), beam width outermost, for the separated
// engine and, optionally, the paged baseline on the same workload.
SweepResult run_latency_sweep(const BenchSetup& base,
                              const SweepOptions& options);
std::vector<BenchRow> rows_of(const std::vector<PointRun>& runs);

// Token-slot accounting of both KV layouts.
struct MemoryRow {
  int bw = 0;
  int prompt_len = 0;
  int nd = 0;
  std::uint64_t shared_slots = 0;
  std::uint64_t unshared_slots = 0;
  std::uint64_t separated_slots = 0;
  std::uint64_t baseline_slots = 0;  // peak
  std::uint64_t block_copies = 0;
  std::uint64_t first_fork_copies = 0;
};

// The paged side replays `nd` forks with random parent choices drawn from
// `seed`.
std::vector<MemoryRow> run_memory_study(const std::vector<int>& beam_widths,
                                        const std::vector<int>& prompt_lens,
                                        int nd, std::size_t block_size,
                                        std::uint64_t seed);
nlohmann::json memory_rows_json(const std::vector<MemoryRow>& rows);
void write_memory_csv(const std::vector<MemoryRow>& rows,
                      const std::string& path);

struct KernelShape {
  int bw = 1;
  int prompt_len = 1;
  int batch = 1;
};

struct KernelRow {
  KernelShape shape;
  double staged_us = 0.0;
  double naive_us = 0.0;
  double speedup = 0.0;
  std::uint64_t staged_tile_loads = 0;
  std::uint64_t naive_tile_loads = 0;
};

struct KernelOptions {
  int heads = 4;
  int head_dim = 16;
  int tile_size = 64;
  // Generated tokens already cached per beam.
  int step = 2;
  int repeats = 5;
  std::uint64_t seed = 1;
};

// Staged attention (one pass over the prompt for all beams) against the
// per-beam baseline that reloads the prompt for every beam. Times are the
// median over repeats of one full call per request in the batch.
std::vector<KernelRow> run_kernel_microbench(
    const std::vector<KernelShape>& shapes, const KernelOptions& options);
nlohmann::json kernel_rows_json(const std::vector<KernelRow>& rows);
void write_kernel_csv(const std::vector<KernelRow>& rows,
                      const std::string& path);

struct AblationToggles {
  bool masking = false;
  bool graph_dispatch = false;
  bool multi_lane = false;
  bool overlap = false;
};

struct AblationOptions {
  // Every one of the 16 combinations; otherwise all off, each toggle
  // alone and all on.
  bool full = false;
  int multi_lane_count = 4;
};

std::vector<AblationToggles> ablation_grid(bool full);
// The same workload for every combination.
std::vector<PointRun> run_ablation(const BenchSetup& base,
                                   const AblationOptions& options);

struct PlannerCollectOptions {
  std::vector<int> shared_lens{64, 256, 1000};
  std::vector<int> unshared_lens{1, 3};
  int beam_width = 128;
  int total_lanes = 4;
  int heads = 4;
  int head_dim = 16;
  int tile_size = 64;
  int repeats = 3;
  std::uint64_t seed = 1;
};

// Times staged attention for every feasible lane split of every
// (shared_len, unshared_len) shape; one sample per combination carrying
// the median latency.
std::vector<PlannerSample> collect_planner_samples(
    const PlannerCollectOptions& options);
// Header: shared_len,unshared_len,lanes_shared,lanes_unshared,lanes_merge,
// latency_s.
void write_planner_samples(const std::vector<PlannerSample>& samples,
                           const std::string& path);

}  // namespace grserve
