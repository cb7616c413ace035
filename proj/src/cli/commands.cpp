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

#include "cli/commands.h"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "attention/planner.h"
#include "bench/metrics.h"
#include "bench/studies.h"
#include "common/errors.h"
#include "scheduler/report.h"
#include "scheduler/virtual_engine.h"

namespace grserve::cli {

namespace {

namespace fs = std::filesystem;

std::string prepare_output(const RunConfig& config) {
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  require(!ec && fs::is_directory(config.out_dir), ErrorCode::kIo,
          "cannot create output directory '" + config.out_dir + "'");
  return config.out_dir;
}

void check(const RunConfig& config) {
  config.validate();
  config.check_inputs();
}

std::string point_name(const PointRun& run) {
  std::ostringstream name;
  name << run.config.kv_mode << "_bw" << run.config.bw << "_rps"
       << run.config.rps;
  return name.str();
}

void write_items(const std::vector<PointRun>& runs, std::ostream& out) {
  for (const auto& run : runs) {
    for (const auto& r : run.report.results) {
      nlohmann::json items = nlohmann::json::array();
      for (const auto& item : r.items) {
        items.push_back({{"tokens", item.tokens}, {"score", item.score}});
      }
      out << nlohmann::json{{"kv_mode", run.config.kv_mode},
                            {"bw", run.config.bw},
                            {"rps", run.config.rps},
                            {"request_id", r.id},
                            {"failed", r.failed},
                            {"items", items}}
                 .dump()
          << '\n';
    }
  }
}

void print_rows(const std::vector<PointRun>& runs, std::ostream& out,
                bool toggles) {
  out << std::left << std::setw(10) << "kv_mode" << std::right
      << std::setw(6) << "bw" << std::setw(8) << "rps";
  if (toggles) {
    out << std::setw(5) << "mask" << std::setw(6) << "graph" << std::setw(6)
        << "lanes" << std::setw(8) << "overlap";
  }
  out << std::setw(11) << "avg_ms" << std::setw(11) << "p50_ms"
      << std::setw(11) << "p99_ms" << std::setw(10) << "tput" << std::setw(9)
      << "invalid" << std::setw(5) << "slo" << '\n';
  for (const auto& run : runs) {
    const auto& c = run.config;
    const auto& m = run.metrics;
    out << std::left << std::setw(10) << c.kv_mode << std::right
        << std::setw(6) << c.bw << std::setw(8) << c.rps;
    if (toggles) {
      out << std::setw(5) << c.masking << std::setw(6) << c.graph_dispatch
          << std::setw(6) << c.lanes << std::setw(8) << c.overlap;
    }
    out << std::fixed << std::setprecision(2) << std::setw(11) << m.avg_ms
        << std::setw(11) << m.p50_ms << std::setw(11) << m.p99_ms
        << std::setw(10) << m.throughput_rps << std::setprecision(4)
        << std::setw(9) << m.invalid_rate << std::setw(5)
        << (m.slo_met ? "ok" : "miss") << std::defaultfloat << '\n';
  }
}

// Highest completed throughput among points meeting the P99 budget.
double throughput_within_slo(const std::vector<PointRun>& runs, int bw) {
  double best = 0.0;
  for (const auto& run : runs) {
    if (run.config.bw == bw && run.metrics.slo_met) {
      best = std::max(best, run.metrics.throughput_rps);
    }
  }
  return best;
}

double p99_at(const std::vector<PointRun>& runs, int bw, double rps) {
  for (const auto& run : runs) {
    if (run.config.bw == bw && run.config.rps == rps) {
      return run.metrics.p99_ms;
    }
  }
  return 0.0;
}

}  // namespace

int cmd_bench(const RunConfig& config, std::ostream& out) {
  check(config);
  const auto weights = load_model(config);
  const auto vocab = load_items(config);
  const std::string dir = prepare_output(config);
  SweepOptions options;
  options.rps = config.studies.sweep_rps;
  options.beam_widths = config.studies.sweep_bw;
  options.include_paged = config.studies.sweep_paged;
  out << "bench: " << (config.virtual_time ? "virtual" : "wall-clock")
      << " time, " << options.beam_widths.size() * options.rps.size()
      << " points per layout\n";
  const SweepResult result =
      run_latency_sweep(config.bench_setup(weights, vocab), options);

  BenchTable table;
  table.study = "bench";
  table.config = to_json(config);
  table.rows = rows_of(result.separated);
  const auto paged_rows = rows_of(result.paged);
  table.rows.insert(table.rows.end(), paged_rows.begin(), paged_rows.end());
  write_csv(rows_of(result.separated), dir + "/bench_separated.csv");
  if (options.include_paged) {
    write_csv(paged_rows, dir + "/bench_paged.csv");
  }
  write_json(table, dir + "/bench.json");
  {
    std::ofstream items(dir + "/items.jsonl");
    require(items.good(), ErrorCode::kIo, "cannot write items.jsonl");
    write_items(result.separated, items);
    write_items(result.paged, items);
  }
  fs::create_directories(dir + "/traces");
  for (const auto* runs : {&result.separated, &result.paged}) {
    for (const auto& run : *runs) {
      write_trace_jsonl(run.report.spans,
                        dir + "/traces/" + point_name(run) + ".jsonl");
    }
  }

  std::vector<PointRun> all = result.separated;
  all.insert(all.end(), result.paged.begin(), result.paged.end());
  print_rows(all, out, false);
  std::uint64_t planned = 0;
  for (const auto& run : all) {
    planned += run.report.planner_calls;
  }
  if (!config.engine.planner_path.empty()) {
    out << "attention planner " << config.engine.planner_path << ": "
        << planned << " decode steps planned\n";
  }
  if (options.include_paged && options.beam_widths.size() >= 2) {
    const int lo = options.beam_widths.front();
    const int hi = options.beam_widths.back();
    const double rps = options.rps.front();
    const double sep_lo = p99_at(result.separated, lo, rps);
    const double paged_lo = p99_at(result.paged, lo, rps);
    out << "p99 growth bw" << lo << "->bw" << hi << " at rps " << rps
        << ": separated "
        << (sep_lo > 0 ? p99_at(result.separated, hi, rps) / sep_lo : 0.0)
        << "x, paged "
        << (paged_lo > 0 ? p99_at(result.paged, hi, rps) / paged_lo : 0.0)
        << "x\n";
  }
  if (options.include_paged) {
    for (int bw : options.beam_widths) {
      out << "throughput within p99 " << config.engine.slo_p99_ms
          << " ms, bw " << bw << ": separated "
          << throughput_within_slo(result.separated, bw) << " rps, paged "
          << throughput_within_slo(result.paged, bw) << " rps\n";
    }
  }
  out << "wrote " << dir << "/bench.json\n";
  return 0;
}

int cmd_memory(const RunConfig& config, std::ostream& out) {
  check(config);
  const std::string dir = prepare_output(config);
  const auto rows = run_memory_study(
      config.studies.memory_bw, config.studies.memory_prompt_len,
      config.beam.decode_steps, config.studies.memory_block_size,
      config.workload.seed);
  write_memory_csv(rows, dir + "/memory.csv");
  {
    std::ofstream json(dir + "/memory.json");
    require(json.good(), ErrorCode::kIo, "cannot write memory.json");
    json << nlohmann::json{{"study", "memory"},
                           {"config", to_json(config)},
                           {"rows", memory_rows_json(rows)}}
                .dump(2)
         << '\n';
  }
  const auto bytes = bytes_per_slot(config.model.layers, config.model.heads,
                                    config.model.head_dim);
  out << std::setw(6) << "bw" << std::setw(8) << "prompt" << std::setw(10)
      << "shared" << std::setw(10) << "unshared" << std::setw(12)
      << "separated" << std::setw(12) << "paged_peak" << std::setw(9)
      << "copies" << std::setw(9) << "ratio" << '\n';
  for (const auto& r : rows) {
    out << std::setw(6) << r.bw << std::setw(8) << r.prompt_len
        << std::setw(10) << r.shared_slots << std::setw(10)
        << r.unshared_slots << std::setw(12) << r.separated_slots
        << std::setw(12) << r.baseline_slots << std::setw(9)
        << r.block_copies << std::setw(9) << std::fixed
        << std::setprecision(2)
        << static_cast<double>(r.baseline_slots) /
               static_cast<double>(r.separated_slots)
        << std::defaultfloat << '\n';
  }
  out << "one slot = " << bytes << " bytes for this model\n";
  return 0;
}

int cmd_kernel(const RunConfig& config, std::ostream& out) {
  check(config);
  const std::string dir = prepare_output(config);
  std::vector<KernelShape> shapes;
  for (const auto& s : config.studies.kernel_shapes) {
    shapes.push_back({s[0], s[1], s[2]});
  }
  KernelOptions options;
  options.heads = config.model.heads;
  options.head_dim = config.model.head_dim;
  options.tile_size = config.model.tile_size;
  options.step = config.beam.decode_steps - 1;
  options.repeats = config.studies.kernel_repeats;
  options.seed = config.workload.seed;
  const auto rows = run_kernel_microbench(shapes, options);
  write_kernel_csv(rows, dir + "/kernel.csv");
  {
    std::ofstream json(dir + "/kernel.json");
    require(json.good(), ErrorCode::kIo, "cannot write kernel.json");
    json << nlohmann::json{{"study", "kernel"},
                           {"config", to_json(config)},
                           {"rows", kernel_rows_json(rows)}}
                .dump(2)
         << '\n';
  }
  out << std::setw(6) << "bw" << std::setw(8) << "prompt" << std::setw(7)
      << "batch" << std::setw(12) << "staged_us" << std::setw(12)
      << "naive_us" << std::setw(9) << "speedup" << std::setw(8) << "tiles"
      << std::setw(12) << "naive_tiles" << '\n';
  for (const auto& r : rows) {
    out << std::setw(6) << r.shape.bw << std::setw(8) << r.shape.prompt_len
        << std::setw(7) << r.shape.batch << std::fixed << std::setprecision(1)
        << std::setw(12) << r.staged_us << std::setw(12) << r.naive_us
        << std::setprecision(2) << std::setw(9) << r.speedup
        << std::defaultfloat << std::setw(8) << r.staged_tile_loads
        << std::setw(12) << r.naive_tile_loads << '\n';
  }
  return 0;
}

int cmd_ablate(const RunConfig& config, bool full, std::ostream& out) {
  check(config);
  const auto weights = load_model(config);
  const auto vocab = load_items(config);
  const std::string dir = prepare_output(config);
  AblationOptions options;
  options.full = full;
  options.multi_lane_count = config.studies.ablation_lanes;
  const auto runs = run_ablation(config.bench_setup(weights, vocab), options);
  BenchTable table;
  table.study = "ablation";
  table.config = to_json(config);
  table.rows = rows_of(runs);
  write_csv(table.rows, dir + "/ablation.csv", true);
  write_json(table, dir + "/ablation.json");
  print_rows(runs, out, true);
  return 0;
}

int cmd_validate(const std::string& scope,
                 const validate::ValidationOptions& options,
                 std::ostream& out) {
  const auto results = validate::run_validation(scope, options);
  bool ok = true;
  for (const auto& r : results) {
    ok &= r.ok();
    out << (r.ok() ? "PASS " : "FAIL ") << r.scope << '/' << r.name << ' '
        << r.passed << '/' << (r.passed + r.failed) << " (" << std::fixed
        << std::setprecision(2) << r.seconds << " s)" << std::defaultfloat;
    if (!r.first_failure.empty()) {
      out << ": " << r.first_failure;
    }
    out << '\n';
  }
  out << (ok ? "all invariants hold" : "validation failed") << '\n';
  return ok ? 0 : 1;
}

int cmd_train_planner(const std::string& samples_path,
                      const std::string& output_path, bool collect,
                      std::uint64_t seed, std::ostream& out) {
  if (collect) {
    PlannerCollectOptions options;
    options.seed = seed;
    const auto samples = collect_planner_samples(options);
    write_planner_samples(samples, samples_path);
    out << "collected " << samples.size() << " samples into " << samples_path
        << '\n';
  }
  const auto samples = read_planner_samples_file(samples_path);
  const PlannerModel model = train_planner(samples);
  std::ofstream file(output_path);
  require(file.good(), ErrorCode::kIo,
          "cannot write planner '" + output_path + "'");
  file << model.to_json().dump(2) << '\n';
  require(file.good(), ErrorCode::kIo,
          "failed writing planner '" + output_path + "'");
  out << "trained on " << samples.size() << " samples: "
      << model.leaf_count() << " leaves, depth " << model.depth()
      << ", training MSE " << training_mse(model, samples) << '\n';
  out << "wrote " << output_path << '\n';
  return 0;
}

int cmd_demo(const std::string& prompt_path, const RunConfig& config,
             std::ostream& out) {
  check(config);
  const auto prompts = load_prompts(prompt_path, config.model.vocab_size);
  require(!prompts.empty(), ErrorCode::kInput,
          "prompt file '" + prompt_path + "' holds no prompts");
  const auto weights = load_model(config);
  const auto vocab = load_items(config);
  Request request;
  request.prompt = prompts.front();
  request.arrival_us = 0.0;
  request.params = config.request_params();
  EngineConfig engine = config.engine;
  engine.num_lanes = 1;
  const EngineReport report =
      VirtualEngine(engine, config.costs, weights, vocab).run({request});
  require(report.results.size() == 1, ErrorCode::kState,
          "demo request did not complete");
  const RequestResult& result = report.results.front();
  if (result.failed) {
    out << "request failed: " << result.error << '\n';
    return 1;
  }
  out << "prompt: " << request.prompt.size() << " tokens, bw "
      << request.params.beam_width << ", k " << request.params.top_k
      << ", nd " << request.params.decode_steps << ", masking "
      << (request.params.masking ? "on" : "off") << '\n';
  out << std::setprecision(6) << std::fixed;
  for (std::size_t i = 0; i < result.items.size(); ++i) {
    const auto& item = result.items[i];
    out << std::setw(4) << i + 1 << "  (";
    for (std::size_t t = 0; t < item.tokens.size(); ++t) {
      out << (t ? ", " : "") << item.tokens[t];
    }
    out << ")  " << item.score;
    if (!vocab->contains(item.tokens)) {
      out << "  [invalid]";
    }
    out << '\n';
  }
  out << "invalid items: " << result.invalid_items << " of "
      << result.items.size() << '\n';
  out << "trace (virtual us):\n" << std::setprecision(1);
  for (const auto& s : report.spans) {
    out << "  " << std::left << std::setw(9) << phase_name(s.phase)
        << std::right << std::setw(3) << s.step << std::setw(12)
        << s.start_us << std::setw(12) << s.end_us << "  lane " << s.lane
        << '\n';
  }
  out << std::defaultfloat;
  return 0;
}

}  // namespace grserve::cli
