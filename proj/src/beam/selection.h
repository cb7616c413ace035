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

#include "common/alloc_counter.h"

namespace grserve {

struct Candidate {
  int beam = 0;
  int token = 0;
  // Cumulative log-probability: beam score + token log-probability.
  double score = 0.0;

  bool operator==(const Candidate&) const = default;
};

// Total order used everywhere: score descending, then beam ascending,
// then token ascending.
inline bool ranks_before(const Candidate& a, const Candidate& b) noexcept {
  if (a.score != b.score) {
    return a.score > b.score;
  }
  if (a.beam != b.beam) {
    return a.beam < b.beam;
  }
  return a.token < b.token;
}

using CandidateList = CountedVector<Candidate>;

// Top-k valid tokens of one masked logits row, best first. Scores are
// beam_score + log_softmax(row)[t]; tokens whose masked logit is at or
// below kMaskedBound are excluded, so the list may be shorter than k.
// No valid token raises a dead-beam error. `scratch` is reused across
// calls; once both buffers have grown to the vocabulary size no further
// allocation happens.
void per_beam_topk(std::span<const float> masked_row, int beam,
                   double beam_score, int k, CandidateList& scratch,
                   CandidateList& out);

struct SelectionStats {
  std::uint64_t visited = 0;
  std::uint64_t comparisons = 0;
  std::uint64_t skipped = 0;
  // Skipped candidates that would have entered the heap; always zero for
  // descending inputs. Only counted when verification is on.
  std::uint64_t unsound_skips = 0;
  bool operator==(const SelectionStats&) const = default;
};

// Global top-`beam_width` over per-beam lists that are each in ranks_before
// order. Uses a bounded min-heap and abandons a list at its first candidate
// that cannot beat the heap minimum. `out` receives the winners best
// first; it is shorter than beam_width when the lists hold fewer
// candidates. No candidates at all raises a no-valid-candidate error.
void select_top_bw(std::span<const CandidateList> lists, int beam_width,
                   CandidateList& out, SelectionStats* stats = nullptr,
                   bool verify_skips = false);

// Baseline: flatten every list and fully sort. Same result as
// select_top_bw.
void select_top_bw_by_sort(std::span<const CandidateList> lists,
                           int beam_width, CandidateList& out,
                           SelectionStats* stats = nullptr);

}  // namespace grserve
