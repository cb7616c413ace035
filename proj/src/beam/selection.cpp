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

#include "beam/selection.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "beam/vocabulary.h"
#include "common/errors.h"

namespace grserve {

void per_beam_topk(std::span<const float> masked_row, int beam,
                   double beam_score, int k, CandidateList& scratch,
                   CandidateList& out) {
  require(k >= 1 && static_cast<std::size_t>(k) <= masked_row.size(),
          ErrorCode::kConfig, "k must lie in [1, vocab]");
  double max_logit = -HUGE_VAL;
  for (float v : masked_row) {
    max_logit = std::max(max_logit, static_cast<double>(v));
  }
  double sum = 0.0;
  for (float v : masked_row) {
    sum += std::exp(static_cast<double>(v) - max_logit);
  }
  const double log_norm = max_logit + std::log(sum);

  scratch.clear();
  for (std::size_t t = 0; t < masked_row.size(); ++t) {
    if (masked_row[t] > kMaskedBound) {
      scratch.push_back(Candidate{
          beam, static_cast<int>(t),
          beam_score + (static_cast<double>(masked_row[t]) - log_norm)});
    }
  }
  require(!scratch.empty(), ErrorCode::kDeadBeam,
          "beam " + std::to_string(beam) + " has no valid next token");
  const auto keep = std::min<std::size_t>(k, scratch.size());
  if (keep < scratch.size()) {
    std::nth_element(scratch.begin(), scratch.begin() + keep, scratch.end(),
                     ranks_before);
  }
  std::sort(scratch.begin(), scratch.begin() + keep, ranks_before);
  out.assign(scratch.begin(), scratch.begin() + keep);
}

void select_top_bw(std::span<const CandidateList> lists, int beam_width,
                   CandidateList& out, SelectionStats* stats,
                   bool verify_skips) {
  require(beam_width >= 1, ErrorCode::kConfig, "beam width must be >= 1");
  SelectionStats local;
  SelectionStats& st = stats ? *stats : local;
  auto worse_first = [&st](const Candidate& a, const Candidate& b) {
    ++st.comparisons;
    return ranks_before(a, b);
  };
  out.clear();
  const auto cap = static_cast<std::size_t>(beam_width);
  for (const CandidateList& list : lists) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Candidate& c = list[i];
      ++st.visited;
      if (out.size() < cap) {
        out.push_back(c);
        std::push_heap(out.begin(), out.end(), worse_first);
        continue;
      }
      if (worse_first(c, out.front())) {
        std::pop_heap(out.begin(), out.end(), worse_first);
        out.back() = c;
        std::push_heap(out.begin(), out.end(), worse_first);
        continue;
      }
      // The list is descending, so nothing after c can beat the minimum.
      st.skipped += list.size() - i - 1;
      if (verify_skips) {
        for (std::size_t j = i + 1; j < list.size(); ++j) {
          if (ranks_before(list[j], out.front())) {
            ++st.unsound_skips;
          }
        }
      }
      break;
    }
  }
  require(!out.empty(), ErrorCode::kNoValidCandidate,
          "no valid candidate in any beam");
  std::sort_heap(out.begin(), out.end(), worse_first);
}

void select_top_bw_by_sort(std::span<const CandidateList> lists,
                           int beam_width, CandidateList& out,
                           SelectionStats* stats) {
  require(beam_width >= 1, ErrorCode::kConfig, "beam width must be >= 1");
  SelectionStats local;
  SelectionStats& st = stats ? *stats : local;
  out.clear();
  for (const CandidateList& list : lists) {
    out.insert(out.end(), list.begin(), list.end());
  }
  st.visited += out.size();
  require(!out.empty(), ErrorCode::kNoValidCandidate,
          "no valid candidate in any beam");
  std::sort(out.begin(), out.end(),
            [&st](const Candidate& a, const Candidate& b) {
              ++st.comparisons;
              return ranks_before(a, b);
            });
  out.resize(std::min<std::size_t>(out.size(), beam_width));
}

}  // namespace grserve
