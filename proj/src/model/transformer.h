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

#include <memory>
#include <span>
#include <vector>

#include "attention/attention.h"
#include "attention/planner.h"
#include "attention/staged_attention.h"
#include "common/thread_pool.h"
#include "kvcache/paged_kv_cache.h"
#include "kvcache/shared_kv_cache.h"
#include "kvcache/unshared_kv_cache.h"
#include "model/weights.h"

namespace grserve {

// Decoder-only transformer (pre-norm, rotary positions, SiLU MLP) over
// shared immutable weights. Holds scratch buffers, so each execution lane
// owns its own instance.
//
// Keys are stored after rotation, so a token's position travels with its
// cached KV when beams are reordered.
class Transformer {
 public:
  explicit Transformer(std::shared_ptr<const Weights> weights);

  const ModelConfig& config() const noexcept { return weights_->config; }
  const Weights& weights() const noexcept { return *weights_; }

  // Lane split for the staged attention inside decode_forward.
  void set_attention_lanes(const PartitionSetting& lanes, ThreadPool* pool);

  // Fills the empty `shared` cache with prompt KV for every layer, seals it
  // and writes the logits of the last prompt position into `logits` ([V]).
  void prefill_forward(std::span<const int> prompt, SharedKvCache& shared,
                       std::span<float> logits);
  std::vector<float> prefill_forward(std::span<const int> prompt,
                                     SharedKvCache& shared);

  // One decode step for tips.size() beams at position prompt_len + step.
  // Appends the step's KV to `unshared`, attends in two stages and writes
  // logits [beams][V].
  void decode_forward(std::span<const int> tips, const SharedKvCache& shared,
                      UnsharedKvCache& unshared, int step,
                      std::span<float> logits,
                      AttentionCounters* counters = nullptr);

  // The same passes split into stages so a caller can hand each layer to
  // another thread: begin_*, then run_layer(l) for l = 0..layers-1 in
  // order, then finish() with [rows][V] logits (one row for prefill).
  // Caches passed to begin_* must outlive finish().
  void begin_prefill(std::span<const int> prompt, SharedKvCache& shared);
  void begin_decode(std::span<const int> tips, const SharedKvCache& shared,
                    UnsharedKvCache& unshared, int step,
                    AttentionCounters* counters = nullptr);
  void run_layer(int layer);
  void finish(std::span<float> logits);
  // Drops a pass that failed part way; the caches it touched are suspect.
  void abort() noexcept { pending_ = Pending::kNone; }

  // Baseline decode over a paged cache. The caller has already forked the
  // tables and reserved the new slot (PagedKvCache::append_slots); each
  // beam gathers its whole sequence through its block table.
  void decode_forward_paged(std::span<const int> tips, PagedKvCache& paged,
                            std::span<float> logits,
                            AttentionCounters* counters = nullptr);

  // Paged token payload: [layers][K, V][heads][head_dim].
  std::size_t paged_token_width() const;
  void load_paged_prompt(const SharedKvCache& shared, PagedKvCache& paged,
                         int beam_width) const;

 private:
  void check_tokens(std::span<const int> tokens) const;
  void embed(std::span<const int> tokens, float* x) const;
  void mlp_block(const LayerWeights& lw, std::size_t rows, float* x);
  void project_logits(const float* x, std::size_t rows, float* logits);
  void prefill_layer(int layer);
  void decode_layer(int layer);

  enum class Pending { kNone, kPrefill, kDecode };

  std::shared_ptr<const Weights> weights_;
  StagedAttention attention_;
  PartitionSetting lanes_{1, 1, 1};
  ThreadPool* pool_ = nullptr;

  Pending pending_ = Pending::kNone;
  int next_layer_ = 0;
  std::size_t rows_ = 0;
  std::size_t prompt_len_ = 0;
  int step_ = 0;
  SharedKvCache* prefill_shared_ = nullptr;
  const SharedKvCache* decode_shared_ = nullptr;
  UnsharedKvCache* unshared_ = nullptr;
  AttentionCounters* counters_ = nullptr;

  std::vector<float> x_, h_, q_, k_, v_, attn_, ffn_, scores_, gather_k_,
      gather_v_;
};

}  // namespace grserve
