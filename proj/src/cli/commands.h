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

#include <iosfwd>
#include <string>

#include "cli/run_config.h"
#include "validate/suites.h"

namespace grserve::cli {

// Every command validates its configuration and inputs before it creates
// output or starts an engine, and returns the process exit status:
// 0 on success, 1 when requested work failed. Configuration problems
// surface as Error(kConfig).

// Latency sweep over studies.sweep_bw x studies.sweep_rps for the
// separated engine and the paged baseline. Writes bench_separated.csv,
// bench_paged.csv, bench.json, items.jsonl and traces/.
int cmd_bench(const RunConfig& config, std::ostream& out);

// Writes memory.csv and memory.json.
int cmd_memory(const RunConfig& config, std::ostream& out);

// Writes kernel.csv and kernel.json.
int cmd_kernel(const RunConfig& config, std::ostream& out);

// Writes ablation.csv and ablation.json; `full` runs all 16 combinations.
int cmd_ablate(const RunConfig& config, bool full, std::ostream& out);

// Prints one line per invariant; 1 if any failed.
int cmd_validate(const std::string& scope,
                 const validate::ValidationOptions& options, std::ostream& out);

// Trains the attention planner from a samples CSV, first measuring the
// samples into that CSV when `collect` is set.
int cmd_train_planner(const std::string& samples_path,
                      const std::string& output_path, bool collect,
                      std::uint64_t seed, std::ostream& out);

// Runs one request (the first prompt in `prompt_path`) in virtual time and
// prints its items and phase trace. Output depends only on the inputs.
int cmd_demo(const std::string& prompt_path, const RunConfig& config,
             std::ostream& out);

}  // namespace grserve::cli
