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

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "beam/beam_search.h"
#include "beam/vocabulary.h"
#include "common/thread_pool.h"
#include "kvcache/paged_kv_cache.h"
#include "kvcache/shared_kv_cache.h"
#include "kvcache/unshared_kv_cache.h"
#include "model/transformer.h"
#include "scheduler/engine_config.h"
#include "scheduler/request.h"

namespace grserve {

// Microseconds on the engine's monotonic clock.
using Clock = std::function<double()>;

// Checks a request against the model and vocabulary before admission:
// non-empty in-range prompt, beam parameters within the vocabulary, and a
// vocabulary of matching depth when masking is on. Raises an input error.
void validate_request(const Request& request, const ModelConfig& model,
                      const ItemVocabulary* vocab);

// Executes batches on one lane. Model forwards run on a dedicated device
// thread; beam selection, cache reorder and mask preparation run on the
// calling (host) thread. Requests of a batch move through the phases in
// lockstep:
//
//   prefill                     [mask prep, level 0]
//   for level in 0..nd-1:
//     beam select + reorder
//     decode step `level`       [mask prep, level + 1]
//
// With overlap on, the bracketed host work runs while the device thread
// computes; otherwise it runs after. The last decode fills the cache to
// beam_width x nd and its logits are not consumed. A request that fails
// is dropped from later phases without affecting the others.
//
// Per-request caches and search state are kept between batches and
// reused when the parameters match.
class BatchRunner {
 public:
  BatchRunner(std::shared_ptr<const Weights> weights,
              std::shared_ptr<const ItemVocabulary> vocab,
              const EngineConfig& config, int lane);
  ~BatchRunner();

  BatchRunner(const BatchRunner&) = delete;
  BatchRunner& operator=(const BatchRunner&) = delete;

  // `spans` may be null. Results follow the batch's request order.
  std::vector<RequestResult> run(const Batch& batch, const Clock& clock,
                                 std::vector<PhaseSpan>* spans);

  std::uint64_t device_handoffs() const noexcept { return handoffs_; }
  // Decode steps whose attention lane split came from the trained planner.
  std::uint64_t planner_calls() const noexcept { return planner_calls_; }

 private:
  struct Slot;

  Slot& slot_for(std::size_t index, const Request& request);
  // Runs `work` on the device thread after the launch overhead.
  std::future<void> handoff(std::function<void()> work);
  // Runs one forward phase for every live slot on the device thread,
  // overlapping `host_work` when enabled. Returns {start, end} of the
  // device work and fills host_span with the host work's interval.
  void device_phase(std::vector<Slot*>& live, bool prefill, int step,
                    const std::function<void()>& host_work,
                    const Clock& clock, double span[2], double host_span[2]);
  void forward(Slot& slot, bool prefill, int step, int layer);

  std::shared_ptr<const Weights> weights_;
  std::shared_ptr<const ItemVocabulary> vocab_;
  EngineConfig config_;
  int lane_;
  Transformer model_;
  ThreadPool device_;
  std::vector<std::unique_ptr<Slot>> slots_;
  std::uint64_t handoffs_ = 0;
  std::unique_ptr<ThreadPool> attention_pool_;
  std::optional<PlannerModel> planner_;
  std::uint64_t planner_calls_ = 0;
};

}  // namespace grserve
