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

#include "kvcache/shared_kv_cache.h"
#include "kvcache/unshared_kv_cache.h"

namespace grserve {

struct AttentionConfig {
  int heads = 1;
  int head_dim = 1;
  float scale = 1.0f;
  // Tokens per shared-stage tile.
  int tile_size = 64;

  static AttentionConfig make(int heads, int head_dim, int tile_size = 64);
  std::size_t head_width() const {
    return static_cast<std::size_t>(heads) * head_dim;
  }
  void validate() const;
};

// Online-softmax statistics per (beam, head): running max `m` of the
// scaled logits, running sum `s` of exp(logit - m) and the value
// accumulator `o` weighted by the same exponentials. An empty partial has
// m = -inf, s = 0, o = 0 and is the identity of combine().
struct PartialAttention {
  int beams = 0;
  int heads = 0;
  int head_dim = 0;
  std::vector<float> m;
  std::vector<float> s;
  std::vector<float> o;

  PartialAttention() = default;
  PartialAttention(int beams, int heads, int head_dim);

  // Resizes (reusing capacity) and clears to the empty state.
  void reset(int beams, int heads, int head_dim);
  bool empty_at(int beam, int head) const {
    return s[static_cast<std::size_t>(beam) * heads + head] == 0.0f;
  }
};

struct AttentionCounters {
  std::uint64_t shared_tile_loads = 0;
  std::uint64_t unshared_rows_read = 0;
};

// Shared stage over prompt positions [begin, end) of `layer`. Every KV tile
// is loaded once and applied to all beams' queries. queries: [beams][H][D].
void attend_shared(std::span<const float> queries, const SharedKvLayer& layer,
                   const AttentionConfig& cfg, PartialAttention& out,
                   AttentionCounters* counters = nullptr);
void attend_shared_range(std::span<const float> queries,
                         const SharedKvLayer& layer, const AttentionConfig& cfg,
                         std::size_t begin, std::size_t end,
                         PartialAttention& out,
                         AttentionCounters* counters = nullptr);

// Unshared stage: beam b attends to its own generated rows 0..step.
// Only beams [beam_begin, beam_end) of `out` are written; the caller
// resets `out` once before splitting work across lanes.
void attend_unshared(std::span<const float> queries,
                     const UnsharedKvLayer& layer, int step,
                     const AttentionConfig& cfg, PartialAttention& out,
                     AttentionCounters* counters = nullptr);
void attend_unshared_beams(std::span<const float> queries,
                           const UnsharedKvLayer& layer, int step,
                           const AttentionConfig& cfg, int beam_begin,
                           int beam_end, PartialAttention& out);

// out = online-softmax combination of a and b for beams [beam_begin,
// beam_end). Symmetric in its arguments bit for bit. `out` may alias `a`.
void combine_partials(const PartialAttention& a, const PartialAttention& b,
                      PartialAttention& out);
void combine_partials_beams(const PartialAttention& a,
                            const PartialAttention& b, PartialAttention& out,
                            int beam_begin, int beam_end);

// output[b][h][:] = o / s. Throws kUndefinedAttention if any (beam, head)
// saw no keys.
void finalize_partial(const PartialAttention& p, std::span<float> output);
void finalize_partial_beams(const PartialAttention& p, std::span<float> output,
                            int beam_begin, int beam_end);

// combine + finalize.
std::vector<float> merge_partials(const PartialAttention& p1,
                                  const PartialAttention& p2);

// Per-beam baseline that does not exploit the shared prefix: each beam
// reloads every prompt tile. Used by the kernel microbenchmark.
void attend_shared_per_beam(std::span<const float> queries,
                            const SharedKvLayer& layer,
                            const AttentionConfig& cfg, PartialAttention& out,
                            AttentionCounters* counters = nullptr);

}  // namespace grserve
