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

#include <random>
#include <vector>

#include "common/errors.h"
#include "kvcache/paged_kv_cache.h"

using namespace grserve;

namespace {

std::vector<int> all_from(int beams, int src) {
  return std::vector<int>(beams, src);
}

std::vector<int> identity(int beams) {
  std::vector<int> v(beams);
  for (int i = 0; i < beams; ++i) {
    v[i] = i;
  }
  return v;
}

}  // namespace

TEST_CASE("misaligned prompt: every beam copies the tail block at first fork") {
  PagedKvCache cache({16, 4096, 0});
  cache.init_prompt(1000, 512);
  CHECK(cache.allocated_blocks() == 63);
  cache.fork_and_append(identity(512));
  CHECK(cache.copy_count() == 512);
  CHECK(cache.tokens_copied() == 512 * 8);
  // The original tail was freed once the last beam copied away from it.
  CHECK(cache.allocated_blocks() == 62 + 512);
  CHECK(cache.refcounts_consistent());
}

TEST_CASE("aligned prompt: first append allocates one block per beam") {
  PagedKvCache cache({16, 4096, 0});
  cache.init_prompt(1024, 512);
  cache.fork_and_append(identity(512));
  CHECK(cache.copy_count() == 0);
  CHECK(cache.allocated_blocks() == 64 + 512);
}

TEST_CASE("three steps at bw=512 exceed the separated unshared footprint") {
  PagedKvCache cache({16, 1 << 14, 0});
  cache.init_prompt(1000, 512);
  std::mt19937 gen(3);
  for (int step = 0; step < 3; ++step) {
    std::vector<int> src(512);
    for (auto& s : src) {
      s = static_cast<int>(gen() % 512);
    }
    cache.fork_and_append(src);
    CHECK(cache.refcounts_consistent());
  }
  CHECK(cache.peak_token_slots() > 1536);
}

TEST_CASE("sole owner appends in place, shared tips are copied per beam") {
  PagedKvCache cache({4, 64, 1});
  std::vector<float> prompt{1, 2, 3, 4, 5, 6};
  cache.init_prompt(6, 2, prompt);
  CHECK(cache.copy_count() == 0);
  cache.fork_and_append(std::vector<int>{0, 1}, std::vector<float>{10, 20});
  CHECK(cache.copy_count() == 2);

  // Beam 0 forks into both: its tip (3 tokens) is shared, so both copy.
  cache.fork_and_append(all_from(2, 0), std::vector<float>{30, 40});
  CHECK(cache.copy_count() == 4);

  std::vector<float> seq(8);
  cache.gather(0, seq);
  CHECK(seq == std::vector<float>{1, 2, 3, 4, 5, 6, 10, 30});
  cache.gather(1, seq);
  CHECK(seq == std::vector<float>{1, 2, 3, 4, 5, 6, 10, 40});

  // Each beam now owns its tip alone: no copies, new blocks for full tips.
  cache.fork_and_append(identity(2), std::vector<float>{50, 60});
  CHECK(cache.copy_count() == 4);
  CHECK(cache.refcounts_consistent());
}

TEST_CASE("retired beams release their blocks at fork") {
  PagedKvCache cache({4, 64, 0});
  cache.init_prompt(4, 3);
  cache.fork_and_append(identity(3));
  const auto before = cache.allocated_blocks();
  cache.fork_and_append(all_from(3, 2));
  // Beams 0 and 1 retire; their private blocks return to the pool.
  CHECK(cache.allocated_blocks() <= before);
  CHECK(cache.refcounts_consistent());
  cache.release_all();
  CHECK(cache.allocated_blocks() == 0);
}

TEST_CASE("pool exhaustion signals out of memory") {
  PagedKvCache cache({16, 4, 0});
  try {
    cache.init_prompt(100, 1);
    FAIL("expected out of memory");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kOutOfMemory);
  }
}

TEST_CASE("refcount conservation under random forks") {
  std::mt19937 gen(99);
  for (int trial = 0; trial < 50; ++trial) {
    const int bw = 1 + static_cast<int>(gen() % 16);
    const std::size_t prompt = 1 + gen() % 40;
    PagedKvCache cache({1 + gen() % 8, 4096, 0});
    cache.init_prompt(prompt, bw);
    for (int step = 0; step < 4; ++step) {
      std::vector<int> src(bw);
      for (auto& s : src) {
        s = static_cast<int>(gen() % bw);
      }
      cache.fork_and_append(src);
      REQUIRE(cache.refcounts_consistent());
      for (int b = 0; b < bw; ++b) {
        CHECK(cache.sequence_length(b) == prompt + step + 1);
      }
    }
  }
}
