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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "bench/metrics.h"
#include "bench/studies.h"
#include "bench/workload.h"
#include "common/errors.h"
#include "support/engine_fixture.h"

using namespace grserve;

namespace {

WorkloadSpec fixed_uniform(double rps, double duration, int len) {
  WorkloadSpec w;
  w.rps = rps;
  w.duration_s = duration;
  w.arrival = ArrivalProcess::kUniform;
  w.prompt_len.kind = PromptLengthSpec::Kind::kFixed;
  w.prompt_len.fixed = len;
  return w;
}

BenchSetup virtual_setup() {
  BenchSetup s;
  s.virtual_time = true;
  s.workload = fixed_uniform(20.0, 1.0, 50);
  return s;
}

}  // namespace

TEST_CASE("uniform fixed workload") {
  const auto requests =
      generate_workload(fixed_uniform(10.0, 1.0, 100), RequestParams{}, 256);
  REQUIRE(requests.size() == 10);
  for (std::size_t i = 0; i < requests.size(); ++i) {
    CHECK(requests[i].id == i);
    CHECK(requests[i].arrival_us == doctest::Approx(100000.0 * i));
    CHECK(requests[i].prompt.size() == 100);
    for (int t : requests[i].prompt) {
      CHECK((t >= 0 && t < 256));
    }
  }
}

TEST_CASE("poisson arrival count") {
  WorkloadSpec w;
  w.rps = 100.0;
  w.duration_s = 60.0;
  w.prompt_len.kind = PromptLengthSpec::Kind::kFixed;
  w.prompt_len.fixed = 1;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    w.seed = seed;
    const auto requests = generate_workload(w, RequestParams{}, 256);
    CHECK(std::abs(static_cast<double>(requests.size()) - 6000.0) <=
          3.0 * std::sqrt(6000.0));
    for (std::size_t i = 1; i < requests.size(); ++i) {
      CHECK(requests[i - 1].arrival_us <= requests[i].arrival_us);
    }
    CHECK(requests.back().arrival_us < 60e6);
  }
}

TEST_CASE("power-law lengths match the analytic CDF") {
  WorkloadSpec w;
  w.rps = 1000.0;
  w.duration_s = 10.0;
  w.arrival = ArrivalProcess::kUniform;
  const auto requests = generate_workload(w, RequestParams{}, 256);
  REQUIRE(requests.size() == 10000);
  std::vector<int> lengths;
  for (const auto& r : requests) {
    lengths.push_back(static_cast<int>(r.prompt.size()));
  }
  std::sort(lengths.begin(), lengths.end());
  CHECK(lengths.front() >= 10);
  CHECK(lengths.back() <= 3000);

  // Oracle: direct normalized sums of n^-1.2.
  double total = 0.0;
  for (int n = 10; n <= 3000; ++n) {
    total += std::pow(n, -1.2);
  }
  double cumulative = 0.0;
  double ks = 0.0;
  std::size_t below = 0;
  for (int n = 10; n <= 3000; ++n) {
    cumulative += std::pow(n, -1.2);
    while (below < lengths.size() && lengths[below] <= n) {
      ++below;
    }
    const double empirical = static_cast<double>(below) / lengths.size();
    ks = std::max(ks, std::abs(empirical - cumulative / total));
  }
  CHECK(ks < 0.05);

  const PowerLawLengths law(1.2, 10, 3000);
  CHECK(law.cdf(9) == 0.0);
  CHECK(law.cdf(3000) == 1.0);
  CHECK(law.cdf(10) == doctest::Approx(std::pow(10, -1.2) / total));
}

TEST_CASE("workloads are deterministic in the seed") {
  WorkloadSpec w;
  const auto a = generate_workload(w, RequestParams{}, 256);
  const auto b = generate_workload(w, RequestParams{}, 256);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].prompt == b[i].prompt);
    CHECK(a[i].arrival_us == b[i].arrival_us);
  }
  w.seed = 2;
  const auto c = generate_workload(w, RequestParams{}, 256);
  CHECK((c.size() != a.size() || c[0].arrival_us != a[0].arrival_us));
}

TEST_CASE("workload validation and JSON") {
  WorkloadSpec w;
  w.rps = 0.0;
  CHECK_THROWS_AS(w.validate(), Error);
  w = WorkloadSpec{};
  w.prompt_len.min = 50;
  w.prompt_len.max = 10;
  CHECK_THROWS_AS(w.validate(), Error);

  WorkloadSpec custom = fixed_uniform(3.0, 4.0, 7);
  custom.seed = 9;
  const nlohmann::json j = custom;
  CHECK(j.get<WorkloadSpec>() == custom);
  nlohmann::json bad = j;
  bad["burst"] = 1;
  CHECK_THROWS_AS(bad.get<WorkloadSpec>(), Error);
  bad = j;
  bad["prompt_len"]["shape"] = 1;
  CHECK_THROWS_AS(bad.get<WorkloadSpec>(), Error);
}

TEST_CASE("prompt files") {
  const std::string path = "bench_test_prompts.txt";
  {
    std::ofstream out(path);
    out << "1 2 3\n\n4 5\n";
  }
  const auto prompts = load_prompts(path, 256);
  REQUIRE(prompts.size() == 2);
  CHECK(prompts[1] == std::vector<int>{4, 5});
  WorkloadSpec w = fixed_uniform(5.0, 1.0, 9);
  w.prompts_path = path;
  const auto requests = generate_workload(w, RequestParams{}, 256);
  REQUIRE(requests.size() == 5);
  CHECK(requests[2].prompt == prompts[0]);
  CHECK(requests[3].prompt == prompts[1]);
  {
    std::ofstream out(path);
    out << "1 x 3\n";
  }
  CHECK_THROWS_AS(load_prompts(path, 256), Error);
  {
    std::ofstream out(path);
    out << "256\n";
  }
  CHECK_THROWS_AS(load_prompts(path, 256), Error);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_prompts(path, 256), Error);
}

TEST_CASE("nearest-rank percentile") {
  std::vector<double> v;
  for (int i = 100; i >= 1; --i) {
    v.push_back(i);
  }
  CHECK(percentile(v, 99.0) == 99.0);
  CHECK(percentile(v, 50.0) == 50.0);
  CHECK(percentile(v, 100.0) == 100.0);
  CHECK(percentile(v, 0.0) == 1.0);
  const std::vector<double> one{4.5};
  for (double p : {0.0, 1.0, 50.0, 99.0, 100.0}) {
    CHECK(percentile(one, p) == 4.5);
  }
  CHECK_THROWS_AS(percentile(std::vector<double>{}, 50.0), Error);
  CHECK_THROWS_AS(percentile(one, 101.0), Error);

  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(300);
    std::vector<double> sample(n);
    for (double& x : sample) {
      x = rng.uniform01();
    }
    std::vector<double> sorted = sample;
    std::sort(sorted.begin(), sorted.end());
    for (int p : {1, 50, 90, 99}) {
      // Integer ceiling: ceil(p * n / 100).
      const std::size_t rank = (static_cast<std::size_t>(p) * n + 99) / 100;
      CHECK(percentile(sample, p) == sorted[rank - 1]);
    }
  }
}

TEST_CASE("summarize") {
  EngineReport report;
  for (int i = 0; i < 10; ++i) {
    RequestResult r;
    r.id = i;
    r.arrival_us = i * 1000.0;
    r.completion_us = r.arrival_us + (i + 1) * 1000.0;
    r.items.resize(4);
    r.invalid_items = i == 0 ? 2 : 0;
    r.memory.shared_token_slots = 10 * i;
    r.memory.unshared_token_slots = 12;
    report.results.push_back(r);
    report.spans.push_back({static_cast<std::uint64_t>(i), Phase::kPrefill,
                            -1, 0.0, 500.0, 0});
  }
  report.rejected = {10, 11};
  const MetricsReport m = summarize(report, 1.0, 5.0);
  CHECK(m.requests == 10);
  CHECK(m.rejected == 2);
  CHECK(m.avg_ms == doctest::Approx(5.5));
  CHECK(m.p50_ms == doctest::Approx(5.0));
  CHECK(m.p99_ms == doctest::Approx(10.0));
  CHECK(m.p50_ms <= m.p99_ms);
  CHECK(m.offered_rps == doctest::Approx(12.0));
  CHECK(m.throughput_rps == doctest::Approx(10.0));
  CHECK(m.throughput_rps <= m.offered_rps);
  CHECK(m.invalid_rate == doctest::Approx(2.0 / 40.0));
  CHECK(m.memory.shared_token_slots == 90);
  CHECK(m.phase_ms.at("prefill") == doctest::Approx(0.5));
  CHECK_FALSE(m.slo_met);

  const MetricsReport empty = summarize(EngineReport{}, 1.0, 5.0);
  CHECK(empty.requests == 0);
  CHECK(empty.throughput_rps == 0.0);
}

TEST_CASE("CSV and JSON export") {
  std::ostringstream header;
  write_csv({}, header);
  CHECK(header.str() ==
        "rps,bw,k,nd,lanes,masking,overlap,avg_ms,p50_ms,p99_ms,"
        "throughput_rps,invalid_rate,shared_slots,unshared_slots,"
        "baseline_slots,block_copies\n");
  std::ostringstream ablation;
  write_csv({}, ablation, true);
  CHECK(ablation.str().find("overlap,graph_dispatch,avg_ms") !=
        std::string::npos);

  const PointRun run = run_point(virtual_setup());
  BenchTable table;
  table.study = "sweep";
  table.config = {{"seed", 1}};
  table.rows = {{run.config, run.metrics}, {run.config, run.metrics}};
  const std::string path = "bench_test_report.json";
  write_json(table, path);
  CHECK(read_json(path) == table);
  std::remove(path.c_str());

  std::ostringstream csv;
  write_csv(table.rows, csv);
  std::size_t lines = 0;
  for (char c : csv.str()) {
    lines += c == '\n';
  }
  CHECK(lines == 3);
  CHECK_THROWS_AS(write_csv(table.rows, "/nonexistent/dir/x.csv"), Error);
}

TEST_CASE("README documents the emitted CSV header") {
  std::ifstream readme(std::string(GRSERVE_SOURCE_DIR) + "/README.md");
  REQUIRE(readme.good());
  std::ostringstream header;
  write_csv({}, header);
  std::string line;
  bool found = false;
  while (std::getline(readme, line)) {
    found |= line + "\n" == header.str();
  }
  CHECK(found);
}

TEST_CASE("memory study closed forms") {
  const auto rows = run_memory_study({128, 256, 512}, {100, 1000}, 3, 16, 7);
  REQUIRE(rows.size() == 6);
  auto at = [&](int bw, int prompt) {
    for (const auto& r : rows) {
      if (r.bw == bw && r.prompt_len == prompt) {
        return r;
      }
    }
    FAIL("missing row");
    return MemoryRow{};
  };
  for (int prompt : {100, 1000}) {
    const auto base = at(128, prompt);
    for (int bw : {128, 256, 512}) {
      const auto r = at(bw, prompt);
      CHECK(r.unshared_slots == static_cast<std::uint64_t>(bw) * 3);
      CHECK(r.shared_slots == static_cast<std::uint64_t>(prompt));
      CHECK(r.separated_slots - base.separated_slots ==
            static_cast<std::uint64_t>(bw - 128) * 3);
      CHECK(r.baseline_slots >= 4 * r.unshared_slots);
    }
    CHECK(at(512, prompt).baseline_slots - base.baseline_slots >
          at(512, prompt).separated_slots - base.separated_slots);
  }
  for (int bw : {128, 256, 512}) {
    CHECK(at(bw, 100).unshared_slots == at(bw, 1000).unshared_slots);
  }
  CHECK(at(512, 1000).first_fork_copies >= 512);
  CHECK(at(512, 1000).block_copies >= 512);
}

TEST_CASE("kernel microbench counters") {
  KernelOptions o;
  o.repeats = 3;
  const auto rows =
      run_kernel_microbench({{1, 1000, 1}, {8, 100, 2}, {64, 130, 1}}, o);
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) {
    const std::uint64_t tiles =
        (static_cast<std::uint64_t>(r.shape.prompt_len) + o.tile_size - 1) /
        o.tile_size;
    CHECK(r.staged_tile_loads == tiles);
    CHECK(r.naive_tile_loads == tiles * r.shape.bw);
    CHECK(r.staged_us > 0.0);
    CHECK(r.naive_us > 0.0);
  }
  // BW = 1: both paths do the same work.
  CHECK(rows[0].speedup > 0.5);
  CHECK(rows[0].speedup < 2.0);
}

TEST_CASE("virtual latency sweep trends") {
  BenchSetup base = virtual_setup();
  base.workload.prompt_len.fixed = 1000;
  base.workload.rps = 5.0;
  SweepOptions options;
  options.rps = {5.0};
  const SweepResult result = run_latency_sweep(base, options);
  REQUIRE(result.separated.size() == 3);
  REQUIRE(result.paged.size() == 3);
  const double separated_growth =
      result.separated[2].metrics.p99_ms / result.separated[0].metrics.p99_ms;
  const double paged_growth =
      result.paged[2].metrics.p99_ms / result.paged[0].metrics.p99_ms;
  CHECK(separated_growth < paged_growth);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(result.separated[i].config.kv_mode == "separated");
    CHECK(result.paged[i].config.kv_mode == "paged");
    CHECK(result.separated[i].config.bw == options.beam_widths[i]);
  }

  // Sparse arrivals see no queueing.
  BenchSetup sparse = virtual_setup();
  sparse.workload = fixed_uniform(0.5, 10.0, 200);
  const PointRun many = run_point(sparse);
  sparse.workload.duration_s = 2.0;
  const PointRun single = run_point(sparse);
  REQUIRE(single.metrics.requests == 1);
  CHECK(many.metrics.requests == 5);
  CHECK(many.metrics.p99_ms == doctest::Approx(single.metrics.p99_ms));
}

TEST_CASE("ablation grid") {
  CHECK(ablation_grid(false).size() == 6);
  const auto full = ablation_grid(true);
  CHECK(full.size() == 16);
  std::set<int> distinct;
  for (const auto& t : full) {
    distinct.insert(t.masking | t.graph_dispatch << 1 | t.multi_lane << 2 |
                    t.overlap << 3);
  }
  CHECK(distinct.size() == 16);
}

TEST_CASE("ablation with real items in virtual time") {
  BenchSetup base = virtual_setup();
  base.weights = testing::toy_weights();
  base.vocab = testing::toy_vocab();
  base.workload = fixed_uniform(10.0, 1.0, 40);
  base.params.beam_width = 16;
  const auto runs = run_ablation(base, AblationOptions{});
  REQUIRE(runs.size() == 6);
  const PointRun& off = runs[0];
  const PointRun& mask_only = runs[1];
  const PointRun& all_on = runs[5];
  CHECK(off.metrics.invalid_rate > 0.0);
  CHECK(mask_only.metrics.invalid_rate == 0.0);
  CHECK(all_on.metrics.invalid_rate == 0.0);
  CHECK(all_on.config.lanes == 4);
  // Masking costs under 10% once overlapped.
  BenchSetup masked = base;
  masked.engine.overlap = true;
  masked.params.masking = false;
  const double unmasked_ms = run_point(masked).metrics.avg_ms;
  masked.params.masking = true;
  const double masked_ms = run_point(masked).metrics.avg_ms;
  CHECK(masked_ms < 1.1 * unmasked_ms);
  CHECK(items_by_request(mask_only.report) == items_by_request(all_on.report));
}

TEST_CASE("overlap shortens the critical path by the hidden work") {
  BenchSetup setup = virtual_setup();
  setup.workload = fixed_uniform(1.0, 3.0, 300);
  setup.params.beam_width = 128;
  setup.costs.mask_per_beam_us = 3.0;
  setup.engine.overlap = false;
  const PointRun serial = run_point(setup);
  setup.engine.overlap = true;
  const PointRun overlapped = run_point(setup);
  REQUIRE(serial.report.results.size() == overlapped.report.results.size());
  for (std::size_t i = 0; i < serial.report.results.size(); ++i) {
    const auto id = serial.report.results[i].id;
    // From the serial trace: hidden = sum over steps of
    // min(mask prep, the forward it can hide behind).
    std::map<std::pair<int, int>, double> dur;
    for (const auto& s : serial.report.spans) {
      if (s.request_id == id) {
        dur[{static_cast<int>(s.phase), s.step}] = s.end_us - s.start_us;
      }
    }
    double hidden = 0.0;
    for (int level = 0; level < setup.params.decode_steps; ++level) {
      const auto mask = dur.find({static_cast<int>(Phase::kMask), level});
      if (mask == dur.end()) {
        continue;
      }
      const auto forward =
          level == 0 ? dur.at({static_cast<int>(Phase::kPrefill), -1})
                     : dur.at({static_cast<int>(Phase::kDecode), level - 1});
      hidden += std::min(mask->second, forward);
    }
    CHECK(serial.report.results[i].latency_us() -
              overlapped.report.results[i].latency_us() ==
          doctest::Approx(hidden));
  }
}

TEST_CASE("bench runs are reproducible") {
  BenchSetup setup = virtual_setup();
  setup.weights = testing::toy_weights();
  setup.vocab = testing::toy_vocab();
  setup.workload.rps = 15.0;
  setup.workload.prompt_len = PromptLengthSpec{};
  setup.workload.prompt_len.max = 300;
  const PointRun a = run_point(setup);
  const PointRun b = run_point(setup);
  CHECK(items_by_request(a.report) == items_by_request(b.report));
  CHECK(a.metrics == b.metrics);
}

TEST_CASE("wall-clock point") {
  BenchSetup setup;
  setup.weights = testing::toy_weights();
  setup.vocab = testing::toy_vocab();
  setup.workload = fixed_uniform(100.0, 0.05, 8);
  setup.params.beam_width = 4;
  const PointRun run = run_point(setup);
  CHECK(run.metrics.requests == 5);
  CHECK(run.metrics.invalid_rate == 0.0);
  CHECK(run.metrics.p50_ms <= run.metrics.p99_ms);
  BenchSetup no_weights;
  CHECK_THROWS_AS(run_point(no_weights), Error);
}
