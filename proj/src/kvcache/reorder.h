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

#include <cstdint>
#include <span>
#include <vector>

#include "common/alloc_counter.h"
#include "kvcache/unshared_kv_cache.h"

namespace grserve {

// Direction of a row move in the in-place reorder. kUp means the row moves
// to a lower index (dst < src), kDown to a higher one.
enum class Direction : std::int8_t { kDown = -1, kNone = 0, kUp = 1 };

// Reorder of the beam rows of an unshared cache, canonicalized so that
// `src` is non-decreasing. `perm[i]` is the caller-order index of the
// selection that landed at plan position i; callers apply the same
// permutation to scores and tokens.
//
// Buffers are reserved once for the beam width and reused across steps.
struct ReorderPlan {
  explicit ReorderPlan(int beam_width = 0);

  std::size_t size() const noexcept { return src.size(); }
  bool is_identity() const noexcept;

  CountedVector<int> src;
  CountedVector<Direction> dir;
  CountedVector<int> perm;
  // Counting-sort scratch, one bucket per source beam.
  CountedVector<int> buckets;
};

// Stable counting sort of `selected_src` by value, then direction per row.
// Every index must lie in [0, beam_width).
void plan_reorder(std::span<const int> selected_src, int beam_width,
                  ReorderPlan& plan);
ReorderPlan plan_reorder(std::span<const int> selected_src, int beam_width);

struct ReorderStats {
  std::uint64_t rows_written = 0;
  std::uint64_t upward_writes = 0;
  std::uint64_t downward_writes = 0;
  // Writes whose source row had already been overwritten in this reorder.
  std::uint64_t hazards = 0;
};

// Test hook: kDescendingUpwardPass runs the upward pass in the wrong order.
enum class ReorderFault { kNone, kDescendingUpwardPass };

// new row b = old row plan.src[b] for every filled step of every layer,
// using the cache's own storage. Pass 1 performs the upward moves in
// ascending destination order, pass 2 the downward moves in descending
// destination order; identity rows are not touched.
void apply_reorder_in_place(UnsharedKvCache& cache, const ReorderPlan& plan,
                            ReorderStats* stats = nullptr,
                            ReorderFault fault = ReorderFault::kNone);

}  // namespace grserve
