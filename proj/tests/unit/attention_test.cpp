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

#include <cmath>
#include <limits>
#include <vector>

#include "attention/attention.h"
#include "attention/reference_attention.h"
#include "attention/staged_attention.h"
#include "common/errors.h"
#include "common/rng.h"
#include "validate/attention_cases.h"

using namespace grserve;
using validate::AttentionCase;
using validate::max_relative_error;

namespace {

std::vector<float> staged_output(const AttentionCase& c) {
  PartialAttention shared;
  PartialAttention unshared;
  const SharedKvLayer layer = c.shared_layer();
  attend_shared(c.queries, layer, c.cfg, shared);
  attend_unshared(c.queries, c.unshared_layer(), c.step, c.cfg, unshared);
  return merge_partials(shared, unshared);
}

}  // namespace

TEST_CASE("attend_shared on an empty prompt yields the empty partial") {
  const auto cfg = AttentionConfig::make(2, 4);
  std::vector<float> q(3 * cfg.head_width(), 0.5f);
  PartialAttention p;
  AttentionCounters counters;
  attend_shared(q, SharedKvLayer{}, cfg, p, &counters);
  CHECK(counters.shared_tile_loads == 0);
  for (std::size_t i = 0; i < p.s.size(); ++i) {
    CHECK(p.s[i] == 0.0f);
    CHECK(std::isinf(p.m[i]));
    CHECK(p.m[i] < 0);
  }
  for (float o : p.o) {
    CHECK(o == 0.0f);
  }
}

TEST_CASE("single orthogonal key gets weight one") {
  const auto cfg = AttentionConfig::make(1, 4);
  std::vector<float> q{1, 0, 0, 0};
  std::vector<float> k{0, 1, 0, 0};
  std::vector<float> v{3, -2, 7, 0.5f};
  SharedKvLayer layer{k, v, 1};
  PartialAttention p;
  attend_shared(q, layer, cfg, p);
  CHECK(p.s[0] == 1.0f);
  CHECK(std::vector<float>(p.o.begin(), p.o.end()) == v);

  UnsharedKvCache cache(1, 3, KvDims{1, 1, 4});
  cache.append_layer(0, 0, k, v);
  PartialAttention u;
  attend_unshared(q, cache.layer(0), 0, cfg, u);
  CHECK(u.s[0] == 1.0f);
  CHECK(std::vector<float>(u.o.begin(), u.o.end()) == v);
}

TEST_CASE("staged attention matches the dense oracle") {
  const auto cfg = AttentionConfig::make(4, 16, 16);
  SUBCASE("bw=8 prompt=64") {
    AttentionCase c(8, 64, 1, cfg, 1);
    CHECK(max_relative_error(staged_output(c), c.reference()) <= 1e-5);
  }
  SUBCASE("unshared step=2 bw=4") {
    AttentionCase c(4, 0, 2, cfg, 2);
    PartialAttention u;
    attend_unshared(c.queries, c.unshared_layer(), 2, c.cfg, u);
    std::vector<float> out(u.o.size());
    finalize_partial(u, out);
    CHECK(max_relative_error(out, c.reference()) <= 1e-5);
  }
  SUBCASE("randomized shapes") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
      const int bw = 1 + static_cast<int>(rng.below(12));
      const int prompt = static_cast<int>(rng.below(150));
      const int step = static_cast<int>(rng.below(3));
      const auto tcfg = AttentionConfig::make(1 + static_cast<int>(rng.below(3)),
                                              4 + 4 * static_cast<int>(rng.below(4)),
                                              1 + static_cast<int>(rng.below(40)));
      AttentionCase c(bw, prompt, step, tcfg, rng.next_u64());
      const double err = max_relative_error(staged_output(c), c.reference());
      CHECK_MESSAGE(err <= 1e-5, "bw=", bw, " prompt=", prompt, " step=", step);
    }
  }
}

TEST_CASE("beam isolation in the unshared stage") {
  const auto cfg = AttentionConfig::make(2, 8);
  AttentionCase c(3, 0, 1, cfg, 5);
  PartialAttention before;
  attend_unshared(c.queries, c.unshared_layer(), 1, cfg, before);

  auto keys = c.unshared.beam_keys_mut(0, 1);
  auto values = c.unshared.beam_values_mut(0, 1);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    keys[i] += 3.0f;
    values[i] -= 1.0f;
  }
  PartialAttention after;
  attend_unshared(c.queries, c.unshared_layer(), 1, cfg, after);
  const std::size_t hw = cfg.head_width();
  for (std::size_t i = 0; i < hw; ++i) {
    CHECK(after.o[i] == before.o[i]);
  }
  CHECK(after.s[0] == before.s[0]);
  CHECK(after.o[hw] != before.o[hw]);
}

TEST_CASE("attend_unshared rejects steps that were not appended") {
  const auto cfg = AttentionConfig::make(1, 4);
  UnsharedKvCache cache(2, 3, KvDims{1, 1, 4});
  std::vector<float> kv(8, 0.1f);
  cache.append_layer(0, 0, kv, kv);
  std::vector<float> q(8, 1.0f);
  PartialAttention p;
  try {
    attend_unshared(q, cache.layer(0), 1, cfg, p);
    FAIL("expected sequencing error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSequencing);
  }
}

TEST_CASE("shape mismatches are rejected") {
  const auto cfg = AttentionConfig::make(2, 4);
  std::vector<float> q(7, 0.0f);
  PartialAttention p;
  CHECK_THROWS_AS(attend_shared(q, SharedKvLayer{}, cfg, p), Error);
  std::vector<float> k(3 * 8), v(3 * 8);
  std::vector<float> q2(8);
  SharedKvLayer bad{k, v, 2};
  CHECK_THROWS_AS(attend_shared(q2, bad, cfg, p), Error);
}

TEST_CASE("merge_partials identities") {
  const auto cfg = AttentionConfig::make(2, 8, 8);
  AttentionCase c(4, 40, 0, cfg, 9);
  PartialAttention shared;
  attend_shared(c.queries, c.shared_layer(), cfg, shared);
  PartialAttention unshared;
  attend_unshared(c.queries, c.unshared_layer(), 0, cfg, unshared);

  SUBCASE("empty partner is the identity") {
    PartialAttention empty(4, cfg.heads, cfg.head_dim);
    const auto merged = merge_partials(shared, empty);
    std::vector<float> direct(shared.o.size());
    finalize_partial(shared, direct);
    CHECK(merged == direct);
  }
  SUBCASE("commutative bit for bit") {
    CHECK(merge_partials(shared, unshared) == merge_partials(unshared, shared));
  }
  SUBCASE("two empties are undefined") {
    PartialAttention a(2, 1, 4);
    PartialAttention b(2, 1, 4);
    try {
      merge_partials(a, b);
      FAIL("expected undefined attention");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kUndefinedAttention);
    }
  }
}

TEST_CASE("tile size does not change the result") {
  const auto base = AttentionConfig::make(2, 16, 1);
  AttentionCase c(6, 137, 2, base, 77);
  std::vector<float> reference;
  for (int tile : {1, 3, 16, 64, 137, 1000}) {
    auto cfg = base;
    cfg.tile_size = tile;
    PartialAttention shared, unshared;
    attend_shared(c.queries, c.shared_layer(), cfg, shared);
    attend_unshared(c.queries, c.unshared_layer(), 2, cfg, unshared);
    const auto out = merge_partials(shared, unshared);
    if (reference.empty()) {
      reference = out;
    } else {
      CHECK(max_relative_error(out, reference) <= 1e-6);
    }
  }
}

TEST_CASE("merged statistics renormalize to one") {
  const auto cfg = AttentionConfig::make(2, 8, 8);
  AttentionCase c(5, 50, 1, cfg, 31);
  PartialAttention shared, unshared, merged;
  attend_shared(c.queries, c.shared_layer(), cfg, shared);
  attend_unshared(c.queries, c.unshared_layer(), 1, cfg, unshared);
  combine_partials(shared, unshared, merged);
  // Recompute each weight exp(logit - m) / s over all visible keys.
  const std::size_t hw = cfg.head_width();
  const std::size_t tokens = c.dense_keys.size() / hw;
  for (int b = 0; b < 5; ++b) {
    for (int h = 0; h < cfg.heads; ++h) {
      const std::size_t bh = b * cfg.heads + h;
      double total = 0;
      for (std::size_t t = 0; t < tokens; ++t) {
        if (c.visible[b * tokens + t] == 0) {
          continue;
        }
        double dot = 0;
        for (int d = 0; d < cfg.head_dim; ++d) {
          dot += c.queries[b * hw + h * cfg.head_dim + d] *
                 c.dense_keys[t * hw + h * cfg.head_dim + d];
        }
        total += std::exp(dot * cfg.scale - merged.m[bh]) / merged.s[bh];
      }
      CHECK(std::abs(total - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("merging tile groups is associative") {
  const auto cfg = AttentionConfig::make(2, 8, 8);
  AttentionCase c(4, 96, 0, cfg, 12);
  const auto layer = c.shared_layer();
  PartialAttention a(4, 2, 8), b(4, 2, 8), d(4, 2, 8);
  attend_shared_range(c.queries, layer, cfg, 0, 24, a);
  attend_shared_range(c.queries, layer, cfg, 24, 64, b);
  attend_shared_range(c.queries, layer, cfg, 64, 96, d);
  PartialAttention ab, ab_d, bd, a_bd;
  combine_partials(a, b, ab);
  combine_partials(ab, d, ab_d);
  combine_partials(b, d, bd);
  combine_partials(a, bd, a_bd);
  std::vector<float> left(ab_d.o.size()), right(a_bd.o.size());
  finalize_partial(ab_d, left);
  finalize_partial(a_bd, right);
  CHECK(max_relative_error(left, right) <= 1e-6);
}

TEST_CASE("shared stage loads each tile once regardless of beam width") {
  const auto cfg = AttentionConfig::make(2, 8, 16);
  for (int bw : {1, 8, 64}) {
    AttentionCase c(bw, 100, 0, cfg, 3);
    AttentionCounters staged, naive;
    PartialAttention p;
    attend_shared(c.queries, c.shared_layer(), cfg, p, &staged);
    CHECK(staged.shared_tile_loads == 7);  // ceil(100 / 16)
    PartialAttention q;
    attend_shared_per_beam(c.queries, c.shared_layer(), cfg, q, &naive);
    CHECK(naive.shared_tile_loads == 7u * bw);
    std::vector<float> x(p.o.size()), y(q.o.size());
    finalize_partial(p, x);
    finalize_partial(q, y);
    CHECK(max_relative_error(x, y) <= 1e-6);
  }
}

TEST_CASE("StagedAttention lane splits agree with the single-lane result") {
  const auto cfg = AttentionConfig::make(2, 8, 8);
  AttentionCase c(9, 75, 2, cfg, 44);
  StagedAttention staged(cfg);
  const auto unshared = c.unshared_layer();
  std::vector<float> single(c.queries.size());
  AttentionCounters counters;
  staged.run(c.queries, c.shared_layer(), &unshared, 2, single, {1, 1, 1},
             nullptr, &counters);
  CHECK(counters.shared_tile_loads == 10);
  CHECK(max_relative_error(single, c.reference()) <= 1e-5);

  ThreadPool pool(3);
  for (PartitionSetting lanes :
       {PartitionSetting{3, 2, 1}, PartitionSetting{2, 1, 4},
        PartitionSetting{16, 16, 16}}) {
    std::vector<float> out(c.queries.size());
    AttentionCounters lane_counters;
    staged.run(c.queries, c.shared_layer(), &unshared, 2, out, lanes, &pool,
               &lane_counters);
    CHECK(lane_counters.shared_tile_loads == 10);
    CHECK(max_relative_error(out, single) <= 1e-6);
  }
}

TEST_CASE("reference attention basics") {
  std::vector<float> q{1, 2};
  std::vector<float> k{0.3f, -0.1f};
  std::vector<float> v{5, 6};
  std::vector<std::uint8_t> vis{1};
  auto out = full_attention_reference(q, k, v, vis, 1, 2);
  CHECK(out[0] == doctest::Approx(5));
  CHECK(out[1] == doctest::Approx(6));

  // Uniform logits: zero query averages the values.
  std::vector<float> zero{0, 0};
  std::vector<float> keys{1, 2, 3, 4, 5, 6};
  std::vector<float> vals{1, 10, 2, 20, 6, 30};
  std::vector<std::uint8_t> all{1, 1, 1};
  out = full_attention_reference(zero, keys, vals, all, 1, 2);
  CHECK(out[0] == doctest::Approx(3));
  CHECK(out[1] == doctest::Approx(20));
}
