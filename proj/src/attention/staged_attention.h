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

#include <span>
#include <vector>

#include "attention/attention.h"
#include "attention/planner.h"
#include "common/thread_pool.h"

namespace grserve {

// Runs shared and unshared stages on disjoint lane groups and merges their
// partials once both have published completion. With no pool, every stage
// runs inline on the caller. Partial buffers are reused across calls.
class StagedAttention {
 public:
  explicit StagedAttention(AttentionConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  const AttentionConfig& config() const noexcept { return cfg_; }

  // output: [beams][heads][head_dim]. `unshared` may be null, in which case
  // only the prompt is attended to.
  void run(std::span<const float> queries, const SharedKvLayer& shared,
           const UnsharedKvLayer* unshared, int step, std::span<float> output,
           const PartitionSetting& lanes = PartitionSetting{1, 1, 1},
           ThreadPool* pool = nullptr, AttentionCounters* counters = nullptr);

 private:
  AttentionConfig cfg_;
  std::vector<PartialAttention> shared_parts_;
  std::vector<AttentionCounters> shared_counters_;
  PartialAttention unshared_part_;
  PartialAttention merged_;
};

}  // namespace grserve
