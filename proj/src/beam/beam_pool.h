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

#include "beam/selection.h"
#include "common/alloc_counter.h"
#include "kvcache/reorder.h"

namespace grserve {

struct FinalItem {
  std::vector<int> tokens;
  double score = 0.0;
  bool operator==(const FinalItem&) const = default;
};

// Fixed set of beam_width slots, each holding up to decode_steps tokens,
// a cumulative log-probability and the per-step log-probabilities. A
// scratch copy of equal size receives each step's result and is swapped
// in, so after construction commits never allocate.
class BeamPool {
 public:
  BeamPool(int beam_width, int decode_steps);

  // One live root beam with score 0 and no tokens.
  void reset() noexcept;

  int beam_width() const noexcept { return beam_width_; }
  int decode_steps() const noexcept { return decode_steps_; }
  int live() const noexcept { return live_; }
  int steps() const noexcept { return steps_; }

  std::span<const int> tokens(int slot) const;
  std::span<const double> step_log_probs(int slot) const;
  double score(int slot) const;
  // Last token of every live slot; valid once a step is committed.
  std::span<const int> tips() const noexcept;

  // New slot i continues live beam selected[plan.perm[i]].beam, where the
  // plan orders slots by source beam. The returned plan drives the cache
  // reorder and stays valid until the next commit. Beam indices outside
  // the live set, or a step other than steps(), raise a state error.
  const ReorderPlan& commit_step(std::span<const Candidate> selected,
                                 int step);

  // All live beams, best first by (score desc, tokens asc). Requires every
  // step committed.
  std::vector<FinalItem> final_items() const;

 private:
  int beam_width_;
  int decode_steps_;
  int live_ = 1;
  int steps_ = 0;
  CountedVector<int> tokens_;
  CountedVector<double> log_probs_;
  CountedVector<double> scores_;
  CountedVector<int> tips_;
  CountedVector<int> next_tokens_;
  CountedVector<double> next_log_probs_;
  CountedVector<double> next_scores_;
  CountedVector<int> src_;
  ReorderPlan plan_;
};

}  // namespace grserve
