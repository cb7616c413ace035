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

#include "kvcache/reorder.h"

#include <algorithm>
#include <string>

#include "common/errors.h"

namespace grserve {

ReorderPlan::ReorderPlan(int beam_width) {
  src.reserve(beam_width);
  dir.reserve(beam_width);
  perm.reserve(beam_width);
  buckets.reserve(beam_width + 1);
}

bool ReorderPlan::is_identity() const noexcept {
  return std::all_of(dir.begin(), dir.end(),
                     [](Direction d) { return d == Direction::kNone; });
}

void plan_reorder(std::span<const int> selected_src, int beam_width,
                  ReorderPlan& plan) {
  const std::size_t n = selected_src.size();
  require(beam_width >= 1, ErrorCode::kPlan, "beam width must be positive");
  require(n <= static_cast<std::size_t>(beam_width), ErrorCode::kPlan,
          "more selections than beams");
  for (int s : selected_src) {
    require(s >= 0 && s < beam_width, ErrorCode::kPlan,
            "source beam index " + std::to_string(s) + " out of range");
  }

  plan.buckets.assign(static_cast<std::size_t>(beam_width) + 1, 0);
  for (int s : selected_src) {
    ++plan.buckets[s + 1];
  }
  for (int b = 0; b < beam_width; ++b) {
    plan.buckets[b + 1] += plan.buckets[b];
  }
  plan.src.resize(n);
  plan.perm.resize(n);
  plan.dir.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int pos = plan.buckets[selected_src[i]]++;
    plan.src[pos] = selected_src[i];
    plan.perm[pos] = static_cast<int>(i);
  }
  for (std::size_t b = 0; b < n; ++b) {
    const int delta = plan.src[b] - static_cast<int>(b);
    plan.dir[b] = delta > 0   ? Direction::kUp
                  : delta < 0 ? Direction::kDown
                              : Direction::kNone;
  }
}

ReorderPlan plan_reorder(std::span<const int> selected_src, int beam_width) {
  ReorderPlan plan(beam_width);
  plan_reorder(selected_src, beam_width, plan);
  return plan;
}

namespace {

void move_row(UnsharedKvCache& cache, int dst, int src, std::size_t count) {
  for (int l = 0; l < cache.dims().layers; ++l) {
    auto keys_dst = cache.beam_keys_mut(l, dst);
    auto keys_src = cache.beam_keys_mut(l, src);
    std::copy_n(keys_src.begin(), count, keys_dst.begin());
    auto values_dst = cache.beam_values_mut(l, dst);
    auto values_src = cache.beam_values_mut(l, src);
    std::copy_n(values_src.begin(), count, values_dst.begin());
  }
}

}  // namespace

void apply_reorder_in_place(UnsharedKvCache& cache, const ReorderPlan& plan,
                            ReorderStats* stats, ReorderFault fault) {
  require(!cache.step_open(), ErrorCode::kState,
          "cannot reorder while a step is partially written");
  const int n = static_cast<int>(plan.size());
  require(n <= cache.beam_width() && plan.dir.size() == plan.src.size(),
          ErrorCode::kPlan, "plan does not fit the cache");
  for (int b = 0; b < n; ++b) {
    require(plan.src[b] >= 0 && plan.src[b] < cache.beam_width(),
            ErrorCode::kPlan, "plan source out of range");
    require(b == 0 || plan.src[b - 1] <= plan.src[b], ErrorCode::kPlan,
            "plan sources are not monotone; in-place reorder would race");
  }
  const std::size_t count =
      static_cast<std::size_t>(cache.filled_steps()) * cache.dims().head_width();
  if (count == 0) {
    return;
  }

  // Upward pass. With monotone sources, src[b] > b >= every earlier
  // destination, so no row is read after being overwritten.
  int max_written = -1;
  auto upward = [&](int b) {
    if (plan.dir[b] != Direction::kUp) {
      return;
    }
    if (stats != nullptr) {
      if (plan.src[b] <= max_written) {
        ++stats->hazards;
      }
      ++stats->rows_written;
      ++stats->upward_writes;
    }
    move_row(cache, b, plan.src[b], count);
    max_written = std::max(max_written, b);
  };
  if (fault == ReorderFault::kDescendingUpwardPass) {
    for (int b = n - 1; b >= 0; --b) {
      upward(b);
    }
  } else {
    for (int b = 0; b < n; ++b) {
      upward(b);
    }
  }

  // Downward pass. src[b] < b <= every earlier destination, and a source
  // row was never an upward destination because src[src[b]] <= src[b].
  int min_written = n;
  for (int b = n - 1; b >= 0; --b) {
    if (plan.dir[b] != Direction::kDown) {
      continue;
    }
    if (stats != nullptr) {
      const int s = plan.src[b];
      if (s >= min_written || (s < n && plan.dir[s] == Direction::kUp)) {
        ++stats->hazards;
      }
      ++stats->rows_written;
      ++stats->downward_writes;
    }
    move_row(cache, b, plan.src[b], count);
    min_written = b;
  }
}

}  // namespace grserve
