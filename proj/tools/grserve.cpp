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

#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "cli/commands.h"
#include "cli/run_config.h"
#include "common/errors.h"

namespace {

using grserve::cli::Overrides;
using grserve::cli::RunConfig;

void add_overrides(CLI::App* cmd, Overrides& b) {
  cmd->add_option("--bw", b.bw, "Beam width (replaces the sweep grid)");
  cmd->add_option("--k", b.k, "Per-beam top-k");
  cmd->add_option("--nd", b.nd, "Decode steps per request");
  cmd->add_option("--rps", b.rps, "Offered load (replaces the sweep grid)");
  cmd->add_option("--duration", b.duration, "Workload window in seconds");
  cmd->add_option("--lanes", b.lanes, "Execution lanes");
  cmd->add_option("--masking", b.masking, "Vocabulary masking (true/false)");
  cmd->add_option("--overlap", b.overlap,
                  "Overlap mask preparation with the forward (true/false)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generative recommendation serving engine and benchmarks"};
  app.require_subcommand(1);
  std::string config_path;
  Overrides b;
  app.add_option("--config", config_path, "JSON run configuration")
      ->check(CLI::ExistingFile);
  app.add_option("--out", b.out_dir, "Output directory");
  app.add_option("--seed", b.seed, "Workload and vocabulary seed");
  app.add_flag("--virtual-time", b.virtual_time,
               "Deterministic synthetic per-operation costs");

  auto* bench = app.add_subcommand("bench", "Latency sweep: separated vs paged");
  add_overrides(bench, b);
  bench->add_flag("--no-paged", b.no_paged, "Skip the paged baseline");

  auto* memory = app.add_subcommand("memory", "KV memory accounting study");
  add_overrides(memory, b);

  auto* kernel = app.add_subcommand("kernel", "Attention kernel microbenchmark");

  bool full = false;
  auto* ablate = app.add_subcommand("ablate", "Optimization toggle ablation");
  add_overrides(ablate, b);
  ablate->add_flag("--full", full, "All 16 toggle combinations");

  std::string scope = "all";
  bool quick = false;
  std::string fault = "none";
  auto* validate = app.add_subcommand("validate", "Oracle and property suites");
  validate->add_option("scope", scope, "all|kvcache|attention|beam|scheduler");
  validate->add_flag("--quick", quick, "Smaller instance counts");
  validate->add_option("--inject-fault", fault,
                       "Mutation check: 'reorder' corrupts the cache reorder")
      ->check(CLI::IsMember({"none", "reorder"}));

  std::string samples_path;
  std::string planner_out;
  bool collect = false;
  auto* train = app.add_subcommand("train-planner",
                                   "Fit the attention lane planner");
  train->add_option("--samples", samples_path, "Samples CSV")->required();
  train->add_option("--output", planner_out, "Planner JSON")->required();
  train->add_flag("--collect", collect,
                  "Measure samples on this machine into --samples first");

  std::string prompt_path;
  bool no_mask = false;
  auto* demo = app.add_subcommand("demo", "Run one request and show its trace");
  demo->add_option("--prompt", prompt_path, "Prompt file")->required();
  demo->add_flag("--no-mask", no_mask, "Disable vocabulary masking");
  add_overrides(demo, b);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Usage errors share the configuration exit code.
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*validate) {
      grserve::validate::ValidationOptions options;
      if (b.seed) {
        options.seed = *b.seed;
      }
      if (quick) {
        options.reorder_random_maps = 50;
        options.attention_cases = 45;
        options.selection_instances = 3;
        options.validity_requests = 40;
        options.scheduler_arrivals = 2000;
      }
      if (fault == "reorder") {
        options.reorder_fault = grserve::ReorderFault::kDescendingUpwardPass;
      }
      return grserve::cli::cmd_validate(scope, options, std::cout);
    }
    if (*train) {
      return grserve::cli::cmd_train_planner(samples_path, planner_out,
                                             collect, b.seed.value_or(1),
                                             std::cout);
    }
    RunConfig config = grserve::cli::resolve_run_config(config_path, b);
    if (*bench) {
      return grserve::cli::cmd_bench(config, std::cout);
    }
    if (*memory) {
      return grserve::cli::cmd_memory(config, std::cout);
    }
    if (*kernel) {
      return grserve::cli::cmd_kernel(config, std::cout);
    }
    if (*ablate) {
      return grserve::cli::cmd_ablate(config, full, std::cout);
    }
    if (*demo) {
      if (no_mask) {
        config.beam.masking = false;
      }
      return grserve::cli::cmd_demo(prompt_path, config, std::cout);
    }
  } catch (const grserve::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == grserve::ErrorCode::kConfig ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
