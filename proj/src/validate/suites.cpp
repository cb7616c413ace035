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

#include "validate/suites.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "attention/attention.h"
#include "attention/staged_attention.h"
#include "beam/beam_search.h"
#include "beam/selection.h"
#include "beam/vocabulary.h"
#include "common/alloc_counter.h"
#include "common/errors.h"
#include "common/rng.h"
#include "common/thread_pool.h"
#include "kvcache/paged_kv_cache.h"
#include "kvcache/unshared_kv_cache.h"
#include "model/weights.h"
#include "scheduler/virtual_engine.h"
#include "validate/attention_cases.h"
#include "validate/beam_cases.h"
#include "validate/reorder_cases.h"

namespace grserve::validate {

namespace {

// Accumulates pass/fail counts for one invariant and times it.
class Recorder {
 public:
  Recorder(std::string scope, std::string name)
      : start_(std::chrono::steady_clock::now()) {
    result_.scope = std::move(scope);
    result_.name = std::move(name);
  }

  void check(bool ok, const std::function<std::string()>& describe) {
    if (ok) {
      ++result_.passed;
      return;
    }
    if (result_.failed++ == 0) {
      result_.first_failure = describe();
    }
  }

  InvariantResult finish() {
    result_.seconds = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - start_)
                          .count();
    return result_;
  }

 private:
  InvariantResult result_;
  std::chrono::steady_clock::time_point start_;
};

template <typename... Args>
std::string describe(const Args&... args) {
  std::ostringstream out;
  (out << ... << args);
  return out.str();
}

const KvDims kReorderDims{2, 2, 3};

// One monotone reorder checked against the out-of-place gather.
bool reorder_matches(int bw, std::span<const int> src, ReorderFault fault) {
  UnsharedKvCache cache(bw, 2, kReorderDims);
  fill_rows(cache, 2);
  const auto expected = gather_rows(snapshot_rows(cache), src);
  apply_reorder_in_place(cache, plan_reorder(src, bw), nullptr, fault);
  return snapshot_rows(cache) == expected;
}

std::vector<int> random_monotone(Rng& rng, int bw) {
  std::vector<int> src(static_cast<std::size_t>(bw));
  for (int& s : src) {
    s = static_cast<int>(rng.below(static_cast<std::uint64_t>(bw)));
  }
  std::sort(src.begin(), src.end());
  return src;
}

std::vector<float> random_rows(Rng& rng, int rows, int vocab) {
  std::vector<float> out(static_cast<std::size_t>(rows) * vocab);
  for (float& v : out) {
    v = rng.uniform_float(-4.0f, 4.0f);
  }
  return out;
}

}  // namespace

std::vector<std::string> validation_scopes() {
  return {"kvcache", "attention", "beam", "scheduler"};
}

InvariantResult check_reorder_exhaustive(const ValidationOptions& o) {
  Recorder rec("kvcache", "reorder_exhaustive_bw_le_6");
  for (int bw = 1; bw <= 6; ++bw) {
    std::vector<int> src(static_cast<std::size_t>(bw));
    std::function<void(int, int)> walk = [&](int pos, int lo) {
      if (pos == bw) {
        rec.check(reorder_matches(bw, src, o.reorder_fault), [&] {
          return describe("bw=", bw, " differs from the gather oracle");
        });
        return;
      }
      for (int s = lo; s < bw; ++s) {
        src[static_cast<std::size_t>(pos)] = s;
        walk(pos + 1, s);
      }
    };
    walk(0, 0);
  }
  return rec.finish();
}

InvariantResult check_reorder_random(const ValidationOptions& o) {
  Recorder rec("kvcache", "reorder_random_monotone_bw_128_512");
  Rng rng(o.seed);
  for (int bw : {128, 512}) {
    for (int i = 0; i < o.reorder_random_maps; ++i) {
      const auto src = random_monotone(rng, bw);
      rec.check(reorder_matches(bw, src, o.reorder_fault), [&] {
        return describe("bw=", bw, " map ", i, " differs from the gather oracle");
      });
    }
  }
  return rec.finish();
}

InvariantResult check_reorder_allocations(const ValidationOptions& o) {
  Recorder rec("kvcache", "reorder_zero_allocations");
  Rng rng(o.seed + 1);
  for (int bw : {6, 128, 512}) {
    UnsharedKvCache cache(bw, 3, kReorderDims);
    fill_rows(cache, 3);
    ReorderPlan plan(bw);
    for (int i = 0; i < 50; ++i) {
      std::vector<int> src(static_cast<std::size_t>(bw));
      for (int& s : src) {
        s = static_cast<int>(rng.below(static_cast<std::uint64_t>(bw)));
      }
      const auto before = AllocationCounter::count();
      plan_reorder(src, bw, plan);
      apply_reorder_in_place(cache, plan, nullptr, o.reorder_fault);
      const auto made = AllocationCounter::count() - before;
      rec.check(made == 0, [&] {
        return describe("bw=", bw, " reorder made ", made, " allocations");
      });
    }
  }
  return rec.finish();
}

InvariantResult check_paged_refcounts(const ValidationOptions& o) {
  Recorder rec("kvcache", "paged_refcounts_consistent");
  Rng rng(o.seed + 2);
  for (int trial = 0; trial < 60; ++trial) {
    const int bw = 1 + static_cast<int>(rng.below(64));
    const std::size_t prompt = 1 + rng.below(200);
    const std::size_t block = 1 + rng.below(20);
    const int steps = 1 + static_cast<int>(rng.below(5));
    PagedKvConfig pc;
    pc.block_size = block;
    pc.num_blocks = paged_blocks_needed(prompt, bw, steps, block);
    PagedKvCache paged(pc);
    paged.init_prompt(prompt, bw);
    for (int s = 0; s < steps; ++s) {
      std::vector<int> src(static_cast<std::size_t>(bw));
      for (int& x : src) {
        x = static_cast<int>(rng.below(static_cast<std::uint64_t>(bw)));
      }
      paged.fork_and_append(src);
      rec.check(paged.refcounts_consistent(), [&] {
        return describe("trial ", trial, " step ", s, " refcounts diverged");
      });
    }
  }
  return rec.finish();
}

InvariantResult check_unshared_slots(const ValidationOptions&) {
  Recorder rec("kvcache", "unshared_slots_eq_bw_x_nd");
  for (int bw : {1, 8, 128, 256, 512}) {
    for (int nd : {1, 3, 5}) {
      UnsharedKvCache cache(bw, nd, KvDims{1, 1, 1});
      const auto stats = memory_report(nullptr, &cache, nullptr);
      rec.check(stats.unshared_token_slots ==
                    static_cast<std::uint64_t>(bw) * nd,
                [&] { return describe("bw=", bw, " nd=", nd); });
    }
  }
  return rec.finish();
}

InvariantResult check_staged_attention(const ValidationOptions& o) {
  Recorder rec("attention", "staged_vs_dense_oracle_1e-5");
  const int bws[] = {1, 8, 128};
  const int prompts[] = {0, 1, 63, 64, 1000};
  const auto cfg = AttentionConfig::make(4, 16, 64);
  Rng rng(o.seed + 3);
  StagedAttention staged(cfg);
  for (int i = 0; i < o.attention_cases; ++i) {
    const int combo = i % 45;
    const int bw = bws[combo / 15];
    const int prompt = prompts[(combo / 3) % 5];
    const int step = combo % 3;
    AttentionCase c(bw, prompt, step, cfg, rng.next_u64());
    std::vector<float> out(c.queries.size());
    const UnsharedKvLayer unshared = c.unshared_layer();
    staged.run(c.queries, c.shared_layer(), &unshared, step, out);
    const double err = max_relative_error(out, c.reference());
    rec.check(err <= 1e-5, [&] {
      return describe("bw=", bw, " prompt=", prompt, " step=", step,
                      " relative error ", err);
    });
  }
  return rec.finish();
}

InvariantResult check_combine_symmetry(const ValidationOptions& o) {
  Recorder rec("attention", "combine_symmetric_bitwise");
  const auto cfg = AttentionConfig::make(2, 8, 16);
  Rng rng(o.seed + 4);
  for (int i = 0; i < 50; ++i) {
    const int bw = 1 + static_cast<int>(rng.below(16));
    AttentionCase c(bw, static_cast<int>(rng.below(100)),
                    static_cast<int>(rng.below(3)), cfg, rng.next_u64());
    PartialAttention a;
    PartialAttention b;
    attend_shared(c.queries, c.shared_layer(), cfg, a);
    attend_unshared(c.queries, c.unshared_layer(), c.step, cfg, b);
    PartialAttention ab;
    PartialAttention ba;
    combine_partials(a, b, ab);
    combine_partials(b, a, ba);
    rec.check(ab.m == ba.m && ab.s == ba.s && ab.o == ba.o,
              [&] { return describe("case ", i, " is order dependent"); });
  }
  return rec.finish();
}

InvariantResult check_shared_tile_loads(const ValidationOptions& o) {
  Recorder rec("attention", "shared_tile_loads_independent_of_bw");
  const auto cfg = AttentionConfig::make(2, 8, 64);
  for (int bw : {1, 8, 128, 512}) {
    for (int prompt : {1, 63, 64, 65, 1000}) {
      AttentionCase c(bw, prompt, 0, cfg, o.seed + 5);
      const std::uint64_t tiles =
          (static_cast<std::uint64_t>(prompt) + 63) / 64;
      AttentionCounters staged;
      StagedAttention attention(cfg);
      std::vector<float> out(c.queries.size());
      const UnsharedKvLayer unshared = c.unshared_layer();
      attention.run(c.queries, c.shared_layer(), &unshared, 0, out,
                    PartitionSetting{1, 1, 1}, nullptr, &staged);
      AttentionCounters naive;
      PartialAttention p;
      attend_shared_per_beam(c.queries, c.shared_layer(), cfg, p, &naive);
      rec.check(staged.shared_tile_loads == tiles &&
                    naive.shared_tile_loads == tiles * bw,
                [&] {
                  return describe("bw=", bw, " prompt=", prompt, " staged ",
                                  staged.shared_tile_loads, " naive ",
                                  naive.shared_tile_loads, " want ", tiles);
                });
    }
  }
  return rec.finish();
}

InvariantResult check_lane_split(const ValidationOptions& o) {
  Recorder rec("attention", "lane_split_invariance_1e-6");
  const auto cfg = AttentionConfig::make(4, 16, 32);
  ThreadPool pool(5);
  Rng rng(o.seed + 6);
  const PartitionSetting splits[] = {{1, 1, 1}, {2, 2, 1}, {3, 1, 1}, {1, 3, 1}};
  for (int i = 0; i < 20; ++i) {
    const int bw = 1 + static_cast<int>(rng.below(64));
    AttentionCase c(bw, 1 + static_cast<int>(rng.below(400)),
                    static_cast<int>(rng.below(3)), cfg, rng.next_u64());
    const UnsharedKvLayer unshared = c.unshared_layer();
    StagedAttention inline_attention(cfg);
    std::vector<float> want(c.queries.size());
    inline_attention.run(c.queries, c.shared_layer(), &unshared, c.step, want);
    for (const auto& split : splits) {
      StagedAttention split_attention(cfg);
      std::vector<float> got(c.queries.size());
      split_attention.run(c.queries, c.shared_layer(), &unshared, c.step, got,
                          split, &pool);
      const double err = max_relative_error(got, want);
      rec.check(err <= 1e-6, [&] {
        return describe("case ", i, " split {", split.lanes_shared, ",",
                        split.lanes_unshared, ",", split.lanes_merge,
                        "} error ", err);
      });
    }
  }
  return rec.finish();
}

InvariantResult check_trie_membership(const ValidationOptions& o) {
  Recorder rec("beam", "trie_matches_set_oracle");
  Rng rng(o.seed + 7);
  const int depth = 3;
  const int vocab = 32;
  std::vector<int> flat;
  std::set<std::vector<int>> oracle;
  for (int i = 0; i < 4000; ++i) {
    std::vector<int> item(depth);
    for (int& t : item) {
      t = static_cast<int>(rng.below(vocab));
    }
    flat.insert(flat.end(), item.begin(), item.end());
    oracle.insert(item);
  }
  const auto trie = ItemVocabulary::build(flat, depth, vocab);
  rec.check(trie.item_count() == oracle.size(), [&] {
    return describe("item count ", trie.item_count(), " vs ", oracle.size());
  });
  for (int i = 0; i < 2000; ++i) {
    std::vector<int> probe(depth);
    for (int& t : probe) {
      t = static_cast<int>(rng.below(vocab));
    }
    rec.check(trie.contains(probe) == (oracle.count(probe) == 1),
              [&] { return describe("membership of probe ", i); });
    // Next-token sets after a random prefix.
    const std::span<const int> prefix(probe.data(), 1 + rng.below(depth - 1));
    std::set<int> want;
    for (const auto& item : oracle) {
      if (std::equal(prefix.begin(), prefix.end(), item.begin())) {
        want.insert(item[prefix.size()]);
      }
    }
    const auto got = trie.children(prefix);
    rec.check(std::set<int>(got.begin(), got.end()) == want,
              [&] { return describe("children after probe ", i); });
  }
  return rec.finish();
}

InvariantResult check_selection_oracle(const ValidationOptions& o) {
  Recorder rec("beam", "early_termination_matches_sort");
  Rng rng(o.seed + 8);
  CandidateList out;
  for (int bw : {1, 8, 128, 512}) {
    for (int k : {1, 8, 128, 512}) {
      for (int i = 0; i < o.selection_instances; ++i) {
        const auto lists = random_candidate_lists(bw, k, rng);
        SelectionStats stats;
        select_top_bw(lists, bw, out, &stats);
        const auto want = sort_oracle(lists, bw);
        const bool same = std::equal(out.begin(), out.end(), want.begin(),
                                     want.end());
        const auto all = static_cast<std::uint64_t>(bw) * k;
        const bool fewer = stats.skipped == 0 || stats.visited < all;
        rec.check(same && fewer, [&] {
          return describe("bw=", bw, " k=", k, " instance ", i,
                          same ? " visited every candidate despite skips"
                               : " differs from the sort oracle");
        });
      }
    }
  }
  return rec.finish();
}

InvariantResult check_masked_validity(const ValidationOptions& o) {
  Recorder rec("beam", "masked_items_are_valid");
  Rng rng(o.seed + 9);
  for (double density : {1e-9, 0.01, 0.5, 1.0}) {
    const auto vocab = planted_vocabulary(3, 16, density, o.seed);
    BeamConfig cfg;
    cfg.beam_width = 8;
    cfg.top_k = 4;
    BeamSearch search(cfg, &vocab, 16);
    for (int r = 0; r < o.validity_requests / 4; ++r) {
      search.reset();
      for (int level = 0; level < 3; ++level) {
        auto rows = random_rows(rng, level == 0 ? 1 : search.live(), 16);
        search.select(rows);
      }
      for (const auto& item : search.final_items()) {
        rec.check(vocab.contains(item.tokens), [&] {
          return describe("density ", density, " request ", r,
                          " emitted an item outside the vocabulary");
        });
      }
    }
  }
  return rec.finish();
}

std::vector<InvariantResult> check_scheduler_contracts(
    const ValidationOptions& o) {
  EngineConfig cfg;
  cfg.max_tokens_per_batch = 2000;
  cfg.wait_quota_ms = 4.0;
  cfg.num_lanes = 4;
  Rng rng(o.seed + 10);
  std::vector<Request> requests;
  double t = 0.0;
  for (int i = 0; i < o.scheduler_arrivals; ++i) {
    t += rng.exponential(1.0 / 400.0);
    Request r;
    r.id = static_cast<std::uint64_t>(i);
    r.prompt.assign(10 + rng.below(i % 97 == 0 ? 3000 : 600), 1);
    r.arrival_us = t;
    if (i % 5 == 0) {
      r.params.beam_width = 16;
    }
    requests.push_back(std::move(r));
  }
  Recorder capacity("scheduler", "capacity_safety");
  Recorder quota("scheduler", "quota_bound");
  Recorder order("scheduler", "phase_order");
  Recorder closure("scheduler", "latency_closure");
  Recorder liveness("scheduler", "liveness");
  const EngineReport report = VirtualEngine(cfg, CostModel{}).run(requests);

  for (const auto& b : report.batches) {
    const bool ok = b.oversize
                        ? b.request_ids.size() == 1 &&
                              b.total_tokens > cfg.max_tokens_per_batch
                        : b.total_tokens <= cfg.max_tokens_per_batch;
    capacity.check(ok, [&] {
      return describe("batch ", b.id, " holds ", b.total_tokens, " tokens");
    });
    const double wait = b.formed_us - b.head_arrival_us;
    quota.check(wait <= cfg.wait_quota_us() + cfg.tick_us() + 1e-6, [&] {
      return describe("batch ", b.id, " head waited ", wait, " us");
    });
  }

  std::map<std::uint64_t, std::map<std::pair<int, int>, PhaseSpan>> spans;
  for (const auto& s : report.spans) {
    spans[s.request_id][{static_cast<int>(s.phase), s.step}] = s;
  }
  for (const auto& [id, at] : spans) {
    auto get = [&at](Phase p, int step) -> const PhaseSpan* {
      auto it = at.find({static_cast<int>(p), step});
      return it == at.end() ? nullptr : &it->second;
    };
    bool ok = get(Phase::kPrefill, -1) != nullptr;
    double previous = ok ? get(Phase::kPrefill, -1)->end_us : 0.0;
    for (int level = 0; ok && get(Phase::kBeam, level); ++level) {
      const PhaseSpan* beam = get(Phase::kBeam, level);
      const PhaseSpan* decode = get(Phase::kDecode, level);
      const PhaseSpan* mask = get(Phase::kMask, level);
      ok = decode != nullptr && previous <= beam->start_us &&
           beam->end_us <= decode->start_us &&
           (mask == nullptr || mask->end_us <= beam->start_us);
      previous = ok ? decode->end_us : previous;
    }
    order.check(ok, [&] { return describe("request ", id); });
  }

  const auto latencies = latencies_from_trace(report.spans);
  for (const auto& r : report.results) {
    const auto it = latencies.find(r.id);
    closure.check(
        it != latencies.end() && std::abs(it->second - r.latency_us()) < 1e-6,
        [&] { return describe("request ", r.id); });
  }
  liveness.check(report.results.size() + report.rejected.size() ==
                     requests.size(),
                 [&] {
                   return describe(report.results.size(), " completed + ",
                                   report.rejected.size(), " rejected of ",
                                   requests.size());
                 });
  return {capacity.finish(), quota.finish(), order.finish(),
          closure.finish(), liveness.finish()};
}

InvariantResult check_scheduler_items(const ValidationOptions& o) {
  Recorder rec("scheduler", "items_invariant_lanes_overlap");
  const auto weights =
      std::make_shared<const Weights>(init_weights(ModelConfig{}));
  const auto vocab = std::make_shared<const ItemVocabulary>(
      random_vocabulary(3, 256, 5000, o.seed));
  Rng rng(o.seed + 11);
  std::vector<Request> requests;
  for (int i = 0; i < 24; ++i) {
    Request r;
    r.id = static_cast<std::uint64_t>(i);
    r.prompt.resize(5 + rng.below(80));
    for (int& t : r.prompt) {
      t = static_cast<int>(rng.below(256));
    }
    r.arrival_us = 300.0 * i;
    r.params.beam_width = 8;
    r.params.top_k = 4;
    requests.push_back(std::move(r));
  }
  std::map<std::uint64_t, std::vector<FinalItem>> reference;
  for (int lanes : {1, 4}) {
    for (bool overlap : {true, false}) {
      EngineConfig cfg;
      cfg.num_lanes = lanes;
      cfg.overlap = overlap;
      cfg.max_tokens_per_batch = 150;
      const auto report =
          VirtualEngine(cfg, CostModel{}, weights, vocab).run(requests);
      for (const auto& r : report.results) {
        if (reference.count(r.id) == 0) {
          reference[r.id] = r.items;
        }
        rec.check(!r.failed && r.items == reference[r.id], [&] {
          return describe("request ", r.id, " lanes=", lanes,
                          " overlap=", overlap);
        });
      }
    }
  }
  return rec.finish();
}

std::vector<InvariantResult> run_validation(const std::string& scope,
                                            const ValidationOptions& o) {
  const auto scopes = validation_scopes();
  require(scope == "all" ||
              std::find(scopes.begin(), scopes.end(), scope) != scopes.end(),
          ErrorCode::kConfig,
          "unknown validation scope '" + scope +
              "' (all, kvcache, attention, beam, scheduler)");
  const auto wants = [&scope](const char* s) {
    return scope == "all" || scope == s;
  };
  std::vector<InvariantResult> out;
  if (wants("kvcache")) {
    out.push_back(check_reorder_exhaustive(o));
    out.push_back(check_reorder_random(o));
    out.push_back(check_reorder_allocations(o));
    out.push_back(check_paged_refcounts(o));
    out.push_back(check_unshared_slots(o));
  }
  if (wants("attention")) {
    out.push_back(check_staged_attention(o));
    out.push_back(check_combine_symmetry(o));
    out.push_back(check_shared_tile_loads(o));
    out.push_back(check_lane_split(o));
  }
  if (wants("beam")) {
    out.push_back(check_trie_membership(o));
    out.push_back(check_selection_oracle(o));
    out.push_back(check_masked_validity(o));
  }
  if (wants("scheduler")) {
    for (auto& r : check_scheduler_contracts(o)) {
      out.push_back(std::move(r));
    }
    out.push_back(check_scheduler_items(o));
  }
  return out;
}

}  // namespace grserve::validate
