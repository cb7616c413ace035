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

#include <vector>

#include "common/alloc_counter.h"
#include "common/errors.h"
#include "kvcache/memory_stats.h"
#include "kvcache/shared_kv_cache.h"
#include "kvcache/unshared_kv_cache.h"

using namespace grserve;

namespace {

const KvDims kDims{2, 2, 4};

std::vector<float> filled(std::size_t n, float base) {
  std::vector<float> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = base + static_cast<float>(i);
  }
  return v;
}

}  // namespace

TEST_CASE("init_unshared capacity is exactly bw x nd") {
  CHECK(UnsharedKvCache(128, 3, kDims).capacity_per_layer() == 384);
  CHECK(UnsharedKvCache(1, 1, kDims).capacity_per_layer() == 1);
  CHECK(UnsharedKvCache(512, 3, kDims).capacity_per_layer() == 1536);

  // Cross-check against the allocator: two planes per layer, one buffer each.
  const auto before_bytes = AllocationCounter::bytes();
  UnsharedKvCache cache(512, 3, kDims);
  const auto bytes = AllocationCounter::bytes() - before_bytes;
  CHECK(bytes >= 1536 * kDims.head_width() * sizeof(float) * 2 * kDims.layers);
  CHECK(cache.filled_steps() == 0);
}

TEST_CASE("init_unshared rejects bad dimensions") {
  CHECK_THROWS_AS(UnsharedKvCache(0, 3, kDims), Error);
  CHECK_THROWS_AS(UnsharedKvCache(4, 0, kDims), Error);
  CHECK_THROWS_AS(UnsharedKvCache(4, 3, KvDims{0, 1, 1}), Error);
  try {
    UnsharedKvCache(1 << 30, 1 << 30, KvDims{1 << 10, 64, 128});
    FAIL("expected overflow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
  }
}

TEST_CASE("append_step sequencing") {
  UnsharedKvCache cache(4, 3, kDims);
  const auto kv = filled(4 * kDims.head_width(), 1.0f);
  std::vector<std::span<const float>> planes(kDims.layers, kv);

  cache.append_step(0, planes, planes);
  CHECK(cache.filled_steps() == 1);

  try {
    cache.append_step(2, planes, planes);
    FAIL("gap must be rejected");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSequencing);
  }
  CHECK(cache.filled_steps() == 1);
}

TEST_CASE("three appends write 12 slots without allocating") {
  UnsharedKvCache cache(4, 3, kDims);
  const auto kv = filled(4 * kDims.head_width(), 0.5f);
  std::vector<std::span<const float>> planes(kDims.layers, kv);
  const auto before = AllocationCounter::count();
  for (int step = 0; step < 3; ++step) {
    cache.append_step(step, planes, planes);
  }
  CHECK(AllocationCounter::count() == before);
  CHECK(cache.filled_steps() == 3);
  const auto layer = cache.layer(1);
  for (int b = 0; b < 4; ++b) {
    auto keys = layer.beam_keys(b);
    REQUIRE(keys.size() == 3 * kDims.head_width());
    for (int s = 0; s < 3; ++s) {
      CHECK(keys[s * kDims.head_width()] == kv[b * kDims.head_width()]);
    }
  }
  CHECK_THROWS_AS(cache.append_step(3, planes, planes), Error);
}

TEST_CASE("layer visibility follows the open step") {
  UnsharedKvCache cache(2, 2, kDims);
  const auto kv = filled(2 * kDims.head_width(), 0.0f);
  cache.append_layer(0, 0, kv, kv);
  CHECK(cache.visible_steps(0) == 1);
  CHECK(cache.visible_steps(1) == 0);
  CHECK_THROWS_AS(cache.append_layer(0, 0, kv, kv), Error);
  cache.append_layer(1, 0, kv, kv);
  CHECK(cache.filled_steps() == 1);
  CHECK(cache.visible_steps(1) == 1);
}

TEST_CASE("shared cache is write-once") {
  SharedKvCache cache(kDims);
  CHECK(cache.empty());
  cache.begin(3);
  const auto kv = filled(3 * kDims.head_width(), 0.0f);
  CHECK_THROWS_AS(cache.seal(), Error);
  cache.write_layer(0, kv, kv);
  cache.write_layer(1, kv, kv);
  cache.seal();
  CHECK(cache.token_slots() == 3);
  CHECK_THROWS_AS(cache.write_layer(0, kv, kv), Error);
  CHECK(cache.layer(1).length == 3);
}

TEST_CASE("memory_report token accounting") {
  SharedKvCache shared(kDims);
  shared.begin(1000);
  UnsharedKvCache unshared(512, 3, kDims);
  auto stats = memory_report(&shared, &unshared, nullptr);
  CHECK(stats.shared_token_slots == 1000);
  CHECK(stats.unshared_token_slots == 1536);

  UnsharedKvCache narrower(256, 3, kDims);
  CHECK(memory_report(&shared, &narrower, nullptr).shared_token_slots ==
        stats.shared_token_slots);

  const auto j = memory_record("r1", stats);
  CHECK(j.at("request_id") == "r1");
  CHECK(j.at("unshared_token_slots") == 1536);
  CHECK(j.get<MemoryStats>() == stats);
}
