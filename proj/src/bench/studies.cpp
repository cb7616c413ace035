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

#include "bench/studies.h"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <thread>

#include "attention/attention.h"
#include "attention/staged_attention.h"
#include "common/errors.h"
#include "common/rng.h"
#include "common/thread_pool.h"
#include "kvcache/paged_kv_cache.h"
#include "kvcache/shared_kv_cache.h"
#include "kvcache/unshared_kv_cache.h"
#include "scheduler/engine.h"

namespace grserve {

PointConfig point_config(const BenchSetup& setup) {
  PointConfig c;
  c.rps = setup.workload.rps;
  c.bw = setup.params.beam_width;
  c.k = setup.params.top_k;
  c.nd = setup.params.decode_steps;
  c.lanes = setup.engine.num_lanes;
  c.masking = setup.params.masking;
  c.overlap = setup.engine.overlap;
  c.graph_dispatch = setup.engine.graph_dispatch;
  c.kv_mode = kv_mode_name(setup.engine.kv_mode);
  return c;
}

PointRun run_point(const BenchSetup& setup) {
  const int vocab_size = setup.weights ? setup.weights->config.vocab_size
                                       : ModelConfig{}.vocab_size;
  std::vector<Request> requests =
      generate_workload(setup.workload, setup.params, vocab_size);
  PointRun run;
  run.config = point_config(setup);
  if (setup.virtual_time) {
    VirtualEngine engine(setup.engine, setup.costs, setup.weights,
                         setup.vocab);
    run.report = engine.run(std::move(requests));
  } else {
    require(setup.weights != nullptr, ErrorCode::kConfig,
            "wall-clock runs need model weights");
    Engine engine(setup.engine, setup.weights, setup.vocab);
    for (Request& r : requests) {
      const double wait_us = r.arrival_us - engine.now_us();
      if (wait_us > 0.0) {
        std::this_thread::sleep_for(
            std::chrono::duration<double, std::micro>(wait_us));
      }
      r.arrival_us = -1.0;
      engine.submit(std::move(r));
    }
    run.report = engine.drain();
  }
  run.metrics = summarize(run.report, setup.workload.duration_s,
                          setup.engine.slo_p99_ms);
  return run;
}

ItemsById items_by_request(const EngineReport& report) {
  ItemsById out;
  for (const auto& r : report.results) {
    out[r.id] = r.items;
  }
  return out;
}

SweepResult run_latency_sweep(const BenchSetup& base,
                              const SweepOptions& options) {
  SweepResult result;
  for (int bw : options.beam_widths) {
    for (double rps : options.rps) {
      BenchSetup setup = base;
      setup.params.beam_width = bw;
      setup.workload.rps = rps;
      setup.engine.kv_mode = KvMode::kSeparated;
      result.separated.push_back(run_point(setup));
      if (options.include_paged) {
        setup.engine.kv_mode = KvMode::kPaged;
        result.paged.push_back(run_point(setup));
      }
    }
  }
  return result;
}

std::vector<BenchRow> rows_of(const std::vector<PointRun>& runs) {
  std::vector<BenchRow> rows;
  for (const auto& r : runs) {
    rows.push_back({r.config, r.metrics});
  }
  return rows;
}

std::vector<MemoryRow> run_memory_study(const std::vector<int>& beam_widths,
                                        const std::vector<int>& prompt_lens,
                                        int nd, std::size_t block_size,
                                        std::uint64_t seed) {
  require(nd >= 1, ErrorCode::kConfig, "nd must be positive");
  const KvDims dims{1, 1, 1};
  std::vector<MemoryRow> rows;
  for (int bw : beam_widths) {
    require(bw >= 1, ErrorCode::kConfig, "beam width must be positive");
    for (int prompt : prompt_lens) {
      require(prompt >= 1, ErrorCode::kConfig, "prompt_len must be positive");
      SharedKvCache shared(dims);
      shared.begin(static_cast<std::size_t>(prompt));
      const std::vector<float> zeros(static_cast<std::size_t>(prompt), 0.0f);
      shared.write_layer(0, zeros, zeros);
      shared.seal();
      UnsharedKvCache unshared(bw, nd, dims);

      PagedKvConfig pc;
      pc.block_size = block_size;
      pc.num_blocks = paged_blocks_needed(static_cast<std::size_t>(prompt), bw,
                                          nd, block_size);
      PagedKvCache paged(pc);
      paged.init_prompt(static_cast<std::size_t>(prompt), bw);
      Rng rng(seed ^ (static_cast<std::uint64_t>(bw) << 32) ^
              static_cast<std::uint64_t>(prompt));
      std::vector<int> sources(static_cast<std::size_t>(bw));
      MemoryRow row;
      for (int step = 0; step < nd; ++step) {
        for (int& s : sources) {
          s = static_cast<int>(rng.below(static_cast<std::uint64_t>(bw)));
        }
        std::sort(sources.begin(), sources.end());
        paged.fork_and_append(sources);
        if (step == 0) {
          row.first_fork_copies = paged.copy_count();
        }
      }
      const MemoryStats stats = memory_report(&shared, &unshared, &paged);
      row.bw = bw;
      row.prompt_len = prompt;
      row.nd = nd;
      row.shared_slots = stats.shared_token_slots;
      row.unshared_slots = stats.unshared_token_slots;
      row.separated_slots = stats.separated_total();
      row.baseline_slots = stats.baseline_token_slots;
      row.block_copies = stats.block_copies;
      rows.push_back(row);
    }
  }
  return rows;
}

nlohmann::json memory_rows_json(const std::vector<MemoryRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"bw", r.bw},
                   {"prompt_len", r.prompt_len},
                   {"nd", r.nd},
                   {"shared_slots", r.shared_slots},
                   {"unshared_slots", r.unshared_slots},
                   {"separated_slots", r.separated_slots},
                   {"baseline_slots", r.baseline_slots},
                   {"block_copies", r.block_copies},
                   {"first_fork_copies", r.first_fork_copies}});
  }
  return out;
}

void write_memory_csv(const std::vector<MemoryRow>& rows,
                      const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write '" + path + "'");
  out << "bw,prompt_len,nd,shared_slots,unshared_slots,separated_slots,"
         "baseline_slots,block_copies,first_fork_copies\n";
  for (const auto& r : rows) {
    out << r.bw << ',' << r.prompt_len << ',' << r.nd << ',' << r.shared_slots
        << ',' << r.unshared_slots << ',' << r.separated_slots << ','
        << r.baseline_slots << ',' << r.block_copies << ','
        << r.first_fork_copies << '\n';
  }
}

namespace {

struct KernelRequest {
  SharedKvCache shared;
  UnsharedKvCache unshared;
  std::vector<float> queries;

  KernelRequest(const KernelShape& shape, const KernelOptions& o, Rng& rng)
      : shared(KvDims{1, o.heads, o.head_dim}),
        unshared(shape.bw, o.step + 1, KvDims{1, o.heads, o.head_dim}) {
    const std::size_t width =
        static_cast<std::size_t>(o.heads) * static_cast<std::size_t>(o.head_dim);
    auto fill = [&rng](std::vector<float>& v) {
      for (float& x : v) {
        x = rng.uniform_float(-1.0f, 1.0f);
      }
    };
    std::vector<float> keys(static_cast<std::size_t>(shape.prompt_len) * width);
    std::vector<float> values(keys.size());
    fill(keys);
    fill(values);
    shared.begin(static_cast<std::size_t>(shape.prompt_len));
    shared.write_layer(0, keys, values);
    shared.seal();
    std::vector<float> step_k(static_cast<std::size_t>(shape.bw) * width);
    std::vector<float> step_v(step_k.size());
    for (int s = 0; s <= o.step; ++s) {
      fill(step_k);
      fill(step_v);
      unshared.append_layer(0, s, step_k, step_v);
    }
    queries.resize(step_k.size());
    fill(queries);
  }
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

std::vector<KernelRow> run_kernel_microbench(
    const std::vector<KernelShape>& shapes, const KernelOptions& o) {
  require(o.repeats >= 1, ErrorCode::kConfig, "repeats must be positive");
  using clock = std::chrono::steady_clock;
  const AttentionConfig cfg =
      AttentionConfig::make(o.heads, o.head_dim, o.tile_size);
  Rng rng(o.seed);
  std::vector<KernelRow> rows;
  for (const KernelShape& shape : shapes) {
    require(shape.bw >= 1 && shape.prompt_len >= 1 && shape.batch >= 1,
            ErrorCode::kConfig, "kernel shape fields must be positive");
    std::vector<std::unique_ptr<KernelRequest>> batch;
    for (int i = 0; i < shape.batch; ++i) {
      batch.push_back(std::make_unique<KernelRequest>(shape, o, rng));
    }
    StagedAttention staged(cfg);
    PartialAttention shared_part;
    PartialAttention unshared_part;
    std::vector<float> out(batch[0]->queries.size());

    KernelRow row;
    row.shape = shape;
    std::vector<double> staged_us;
    std::vector<double> naive_us;
    for (int rep = 0; rep < o.repeats; ++rep) {
      AttentionCounters staged_counters;
      auto t0 = clock::now();
      for (auto& r : batch) {
        const UnsharedKvLayer unshared = r->unshared.layer(0);
        staged.run(r->queries, r->shared.layer(0), &unshared,
                   o.step, out, PartitionSetting{1, 1, 1}, nullptr,
                   &staged_counters);
      }
      auto t1 = clock::now();
      AttentionCounters naive_counters;
      for (auto& r : batch) {
        attend_shared_per_beam(r->queries, r->shared.layer(0), cfg,
                               shared_part, &naive_counters);
        attend_unshared(r->queries, r->unshared.layer(0), o.step, cfg,
                        unshared_part);
        combine_partials(shared_part, unshared_part, shared_part);
        finalize_partial(shared_part, out);
      }
      auto t2 = clock::now();
      staged_us.push_back(
          std::chrono::duration<double, std::micro>(t1 - t0).count());
      naive_us.push_back(
          std::chrono::duration<double, std::micro>(t2 - t1).count());
      // Per request, from one repeat.
      row.staged_tile_loads =
          staged_counters.shared_tile_loads / static_cast<std::uint64_t>(shape.batch);
      row.naive_tile_loads =
          naive_counters.shared_tile_loads / static_cast<std::uint64_t>(shape.batch);
    }
    row.staged_us = median(staged_us);
    row.naive_us = median(naive_us);
    row.speedup = row.staged_us > 0.0 ? row.naive_us / row.staged_us : 0.0;
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json kernel_rows_json(const std::vector<KernelRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"bw", r.shape.bw},
                   {"prompt_len", r.shape.prompt_len},
                   {"batch", r.shape.batch},
                   {"staged_us", r.staged_us},
                   {"naive_us", r.naive_us},
                   {"speedup", r.speedup},
                   {"staged_tile_loads", r.staged_tile_loads},
                   {"naive_tile_loads", r.naive_tile_loads}});
  }
  return out;
}

void write_kernel_csv(const std::vector<KernelRow>& rows,
                      const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write '" + path + "'");
  out << "bw,prompt_len,batch,staged_us,naive_us,speedup,staged_tile_loads,"
         "naive_tile_loads\n";
  for (const auto& r : rows) {
    out << r.shape.bw << ',' << r.shape.prompt_len << ',' << r.shape.batch
        << ',' << r.staged_us << ',' << r.naive_us << ',' << r.speedup << ','
        << r.staged_tile_loads << ',' << r.naive_tile_loads << '\n';
  }
}

std::vector<AblationToggles> ablation_grid(bool full) {
  std::vector<AblationToggles> grid;
  auto from_bits = [](int bits) {
    return AblationToggles{(bits & 1) != 0, (bits & 2) != 0, (bits & 4) != 0,
                           (bits & 8) != 0};
  };
  if (full) {
    for (int bits = 0; bits < 16; ++bits) {
      grid.push_back(from_bits(bits));
    }
  } else {
    for (int bits : {0, 1, 2, 4, 8, 15}) {
      grid.push_back(from_bits(bits));
    }
  }
  return grid;
}

std::vector<PointRun> run_ablation(const BenchSetup& base,
                                   const AblationOptions& options) {
  require(options.multi_lane_count >= 2, ErrorCode::kConfig,
          "multi-lane ablation needs at least 2 lanes");
  std::vector<PointRun> runs;
  for (const AblationToggles& t : ablation_grid(options.full)) {
    BenchSetup setup = base;
    setup.params.masking = t.masking;
    setup.engine.graph_dispatch = t.graph_dispatch;
    setup.engine.num_lanes = t.multi_lane ? options.multi_lane_count : 1;
    setup.engine.overlap = t.overlap;
    runs.push_back(run_point(setup));
  }
  return runs;
}

std::vector<PlannerSample> collect_planner_samples(
    const PlannerCollectOptions& o) {
  require(o.total_lanes >= 3, ErrorCode::kConfig,
          "planner collection needs at least 3 lanes");
  require(o.repeats >= 1, ErrorCode::kConfig, "repeats must be positive");
  using clock = std::chrono::steady_clock;
  const AttentionConfig cfg =
      AttentionConfig::make(o.heads, o.head_dim, o.tile_size);
  ThreadPool pool(static_cast<std::size_t>(o.total_lanes));
  Rng rng(o.seed);
  KernelOptions ko;
  ko.heads = o.heads;
  ko.head_dim = o.head_dim;
  ko.tile_size = o.tile_size;
  std::vector<PlannerSample> samples;
  for (int shared_len : o.shared_lens) {
    for (int unshared_len : o.unshared_lens) {
      require(shared_len >= 1 && unshared_len >= 1, ErrorCode::kConfig,
              "planner shapes must be positive");
      ko.step = unshared_len - 1;
      const KernelRequest request({o.beam_width, shared_len, 1}, ko, rng);
      const UnsharedKvLayer unshared = request.unshared.layer(0);
      std::vector<float> out(request.queries.size());
      for (int ls = 1; ls <= o.total_lanes; ++ls) {
        for (int lu = 1; ls + lu < o.total_lanes; ++lu) {
          for (int lm = 1; ls + lu + lm <= o.total_lanes; ++lm) {
            const PartitionSetting setting{ls, lu, lm};
            StagedAttention attention(cfg);
            std::vector<double> seconds;
            for (int rep = 0; rep < o.repeats; ++rep) {
              const auto t0 = clock::now();
              attention.run(request.queries, request.shared.layer(0),
                            &unshared, ko.step, out, setting, &pool);
              seconds.push_back(
                  std::chrono::duration<double>(clock::now() - t0).count());
            }
            PlannerSample sample;
            sample.shared_len = shared_len;
            sample.unshared_len = unshared_len;
            sample.setting = setting;
            sample.latency_s = median(seconds);
            samples.push_back(sample);
          }
        }
      }
    }
  }
  return samples;
}

void write_planner_samples(const std::vector<PlannerSample>& samples,
                           const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write '" + path + "'");
  out << "shared_len,unshared_len,lanes_shared,lanes_unshared,lanes_merge,"
         "latency_s\n";
  out << std::setprecision(10);
  for (const auto& s : samples) {
    out << s.shared_len << ',' << s.unshared_len << ','
        << s.setting.lanes_shared << ',' << s.setting.lanes_unshared << ','
        << s.setting.lanes_merge << ',' << s.latency_s << '\n';
  }
}

}  // namespace grserve
