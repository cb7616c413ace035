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

#include "attention/staged_attention.h"

#include <algorithm>
#include <future>

#include "common/errors.h"

namespace grserve {
namespace {

// [begin, end) of chunk i when n items are split into `parts` pieces.
std::pair<std::size_t, std::size_t> chunk(std::size_t n, std::size_t parts,
                                          std::size_t i) {
  const std::size_t base = n / parts;
  const std::size_t extra = n % parts;
  const std::size_t begin = i * base + std::min(i, extra);
  return {begin, begin + base + (i < extra ? 1 : 0)};
}

}  // namespace

void StagedAttention::run(std::span<const float> queries,
                          const SharedKvLayer& shared,
                          const UnsharedKvLayer* unshared, int step,
                          std::span<float> output,
                          const PartitionSetting& lanes, ThreadPool* pool,
                          AttentionCounters* counters) {
  const std::size_t hw = cfg_.head_width();
  require(queries.size() % hw == 0 && output.size() == queries.size(),
          ErrorCode::kShape, "staged attention shape mismatch");
  const int beams = static_cast<int>(queries.size() / hw);

  // Shared stage: contiguous tile-aligned chunks, one partial per lane.
  const std::size_t tiles =
      (shared.length + cfg_.tile_size - 1) / cfg_.tile_size;
  const std::size_t shared_lanes =
      tiles == 0 ? 0
                 : std::clamp<std::size_t>(std::max(lanes.lanes_shared, 1), 1,
                                           tiles);
  if (shared_parts_.size() < std::max<std::size_t>(shared_lanes, 1)) {
    shared_parts_.resize(std::max<std::size_t>(shared_lanes, 1));
  }
  shared_counters_.assign(std::max<std::size_t>(shared_lanes, 1),
                          AttentionCounters{});
  for (std::size_t i = 0; i < std::max<std::size_t>(shared_lanes, 1); ++i) {
    shared_parts_[i].reset(beams, cfg_.heads, cfg_.head_dim);
  }

  const bool has_unshared = unshared != nullptr;
  const int unshared_lanes =
      has_unshared ? std::clamp(lanes.lanes_unshared, 1, std::max(beams, 1))
                   : 0;
  unshared_part_.reset(beams, cfg_.heads, cfg_.head_dim);

  auto shared_task = [&](std::size_t i) {
    const auto [t_begin, t_end] = chunk(tiles, shared_lanes, i);
    const std::size_t begin = t_begin * cfg_.tile_size;
    const std::size_t end = std::min(shared.length, t_end * cfg_.tile_size);
    attend_shared_range(queries, shared, cfg_, begin, end, shared_parts_[i],
                        &shared_counters_[i]);
  };
  auto unshared_task = [&](int i) {
    const auto [b_begin, b_end] = chunk(beams, unshared_lanes, i);
    attend_unshared_beams(queries, *unshared, step, cfg_,
                          static_cast<int>(b_begin), static_cast<int>(b_end),
                          unshared_part_);
  };

  if (pool == nullptr || pool->size() == 0) {
    for (std::size_t i = 0; i < shared_lanes; ++i) {
      shared_task(i);
    }
    for (int i = 0; i < unshared_lanes; ++i) {
      unshared_task(i);
    }
  } else {
    // Completion flags for the producer stages; the merge stage starts only
    // after every producer has published.
    std::vector<std::future<void>> done;
    for (std::size_t i = 0; i < shared_lanes; ++i) {
      done.push_back(pool->submit([&, i] { shared_task(i); }));
    }
    for (int i = 0; i < unshared_lanes; ++i) {
      done.push_back(pool->submit([&, i] { unshared_task(i); }));
    }
    for (auto& f : done) {
      f.get();
    }
  }
  if (counters != nullptr) {
    for (std::size_t i = 0; i < shared_lanes; ++i) {
      counters->shared_tile_loads += shared_counters_[i].shared_tile_loads;
    }
    if (has_unshared) {
      counters->unshared_rows_read +=
          static_cast<std::uint64_t>(beams) * (step + 1);
    }
  }

  merged_.reset(beams, cfg_.heads, cfg_.head_dim);
  const int merge_lanes = std::clamp(lanes.lanes_merge, 1, std::max(beams, 1));
  auto merge_task = [&](int i) {
    const auto [b_begin, b_end] = chunk(beams, merge_lanes, i);
    const int lo = static_cast<int>(b_begin);
    const int hi = static_cast<int>(b_end);
    for (std::size_t p = 0; p < shared_lanes; ++p) {
      combine_partials_beams(merged_, shared_parts_[p], merged_, lo, hi);
    }
    if (has_unshared) {
      combine_partials_beams(merged_, unshared_part_, merged_, lo, hi);
    }
    finalize_partial_beams(merged_, output, lo, hi);
  };
  if (pool == nullptr || pool->size() == 0) {
    for (int i = 0; i < merge_lanes; ++i) {
      merge_task(i);
    }
  } else {
    pool->parallel_for(merge_lanes,
                       [&](std::size_t i) { merge_task(static_cast<int>(i)); });
  }
}

}  // namespace grserve
