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
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "common/alloc_counter.h"
#include "common/errors.h"
#include "kvcache/reorder.h"
#include "support/gather_oracle.h"

using namespace grserve;
using grserve::testing::fill_rows;
using grserve::testing::gather_rows;
using grserve::testing::snapshot_rows;

namespace {

const KvDims kDims{2, 1, 3};

std::vector<Direction> dirs(std::initializer_list<int> d) {
  std::vector<Direction> out;
  for (int x : d) {
    out.push_back(static_cast<Direction>(x));
  }
  return out;
}

}  // namespace

TEST_CASE("plan_reorder identity") {
  const std::vector<int> src{0, 1, 2, 3};
  auto plan = plan_reorder(src, 4);
  CHECK(std::vector<int>(plan.src.begin(), plan.src.end()) == src);
  CHECK(std::vector<int>(plan.perm.begin(), plan.perm.end()) == src);
  CHECK(plan.is_identity());
}

TEST_CASE("plan_reorder directions follow sign(src - dst)") {
  auto plan = plan_reorder(std::vector<int>{1, 2, 2, 3}, 4);
  CHECK(std::vector<Direction>(plan.dir.begin(), plan.dir.end()) ==
        dirs({1, 1, 0, 0}));
}

TEST_CASE("plan_reorder canonicalizes by stable sort") {
  auto plan = plan_reorder(std::vector<int>{2, 0, 1, 0}, 4);
  CHECK(std::vector<int>(plan.src.begin(), plan.src.end()) ==
        std::vector<int>{0, 0, 1, 2});
  CHECK(std::vector<int>(plan.perm.begin(), plan.perm.end()) ==
        std::vector<int>{1, 3, 2, 0});
  CHECK(std::vector<Direction>(plan.dir.begin(), plan.dir.end()) ==
        dirs({0, -1, -1, -1}));
}

TEST_CASE("plan_reorder rejects out-of-range sources") {
  try {
    plan_reorder(std::vector<int>{0, 4}, 4);
    FAIL("expected plan error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kPlan);
  }
  CHECK_THROWS_AS(plan_reorder(std::vector<int>{-1}, 4), Error);
}

TEST_CASE("plan_reorder is stable for random selections") {
  std::mt19937 gen(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int bw = 1 + static_cast<int>(gen() % 40);
    std::vector<int> src(bw);
    for (auto& s : src) {
      s = static_cast<int>(gen() % bw);
    }
    auto plan = plan_reorder(src, bw);
    std::vector<int> order(bw);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return src[a] < src[b]; });
    CHECK(std::vector<int>(plan.perm.begin(), plan.perm.end()) == order);
    for (int b = 0; b < bw; ++b) {
      CHECK(plan.src[b] == src[plan.perm[b]]);
    }
  }
}

TEST_CASE("apply_reorder_in_place hand examples") {
  SUBCASE("upward [1,2,2,3] on ABCD gives BCCD") {
    UnsharedKvCache cache(4, 2, kDims);
    fill_rows(cache, 1);
    const auto rows = snapshot_rows(cache);
    auto plan = plan_reorder(std::vector<int>{1, 2, 2, 3}, 4);
    apply_reorder_in_place(cache, plan);
    const auto after = snapshot_rows(cache);
    CHECK(after[0] == rows[1]);
    CHECK(after[1] == rows[2]);
    CHECK(after[2] == rows[2]);
    CHECK(after[3] == rows[3]);
  }
  SUBCASE("downward [0,0,1,2] on ABCD gives AABC") {
    UnsharedKvCache cache(4, 2, kDims);
    fill_rows(cache, 2);
    const auto rows = snapshot_rows(cache);
    ReorderStats stats;
    auto plan = plan_reorder(std::vector<int>{0, 0, 1, 2}, 4);
    apply_reorder_in_place(cache, plan, &stats);
    const auto after = snapshot_rows(cache);
    CHECK(after[0] == rows[0]);
    CHECK(after[1] == rows[0]);
    CHECK(after[2] == rows[1]);
    CHECK(after[3] == rows[2]);
    CHECK(stats.downward_writes == 3);
    CHECK(stats.upward_writes == 0);
    CHECK(stats.hazards == 0);
  }
  SUBCASE("identity plan writes nothing") {
    UnsharedKvCache cache(4, 3, kDims);
    fill_rows(cache, 3);
    const auto rows = snapshot_rows(cache);
    ReorderStats stats;
    apply_reorder_in_place(cache, plan_reorder(std::vector<int>{0, 1, 2, 3}, 4),
                           &stats);
    CHECK(stats.rows_written == 0);
    CHECK(snapshot_rows(cache) == rows);
  }
}

TEST_CASE("apply_reorder_in_place rejects non-monotone plans") {
  UnsharedKvCache cache(3, 1, kDims);
  fill_rows(cache, 1);
  ReorderPlan plan(3);
  plan.src.assign({1, 0, 2});
  plan.dir.assign({Direction::kUp, Direction::kDown, Direction::kNone});
  try {
    apply_reorder_in_place(cache, plan);
    FAIL("expected plan error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kPlan);
  }
}

TEST_CASE("gather-oracle equivalence over every monotone map, bw <= 6") {
  for (int bw = 1; bw <= 6; ++bw) {
    std::vector<int> src(bw);
    std::size_t maps = 0;
    std::function<void(int, int)> rec = [&](int pos, int lo) {
      if (pos == bw) {
        UnsharedKvCache cache(bw, 2, kDims);
        fill_rows(cache, 2);
        const auto expected = gather_rows(snapshot_rows(cache), src);
        ReorderStats stats;
        ReorderPlan plan(bw);
        const auto before = AllocationCounter::count();
        plan_reorder(src, bw, plan);
        apply_reorder_in_place(cache, plan, &stats);
        CHECK(AllocationCounter::count() == before);
        CHECK(snapshot_rows(cache) == expected);
        CHECK(stats.hazards == 0);
        ++maps;
        return;
      }
      for (int s = lo; s < bw; ++s) {
        src[pos] = s;
        rec(pos + 1, s);
      }
    };
    rec(0, 0);
    // C(2bw-1, bw) non-decreasing maps.
    const std::size_t expected_maps[] = {0, 1, 3, 10, 35, 126, 462};
    CHECK(maps == expected_maps[bw]);
  }
}

TEST_CASE("reorder allocates nothing once the plan is reserved") {
  const int bw = 64;
  UnsharedKvCache cache(bw, 3, kDims);
  fill_rows(cache, 3);
  ReorderPlan plan(bw);
  std::mt19937 gen(11);
  std::vector<int> src(bw);
  for (int trial = 0; trial < 20; ++trial) {
    for (auto& s : src) {
      s = static_cast<int>(gen() % bw);
    }
    const auto before = AllocationCounter::count();
    plan_reorder(src, bw, plan);
    apply_reorder_in_place(cache, plan);
    CHECK(AllocationCounter::count() == before);
  }
}

TEST_CASE("flipping the upward pass order is caught") {
  UnsharedKvCache cache(4, 1, kDims);
  fill_rows(cache, 1);
  const auto rows = snapshot_rows(cache);
  ReorderStats stats;
  apply_reorder_in_place(cache, plan_reorder(std::vector<int>{1, 2, 2, 3}, 4),
                         &stats, ReorderFault::kDescendingUpwardPass);
  CHECK(stats.hazards > 0);
  CHECK(snapshot_rows(cache) != gather_rows(rows, std::vector<int>{1, 2, 2, 3}));
}
