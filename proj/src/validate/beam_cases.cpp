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

#include "validate/beam_cases.h"

#include <algorithm>

namespace grserve::validate {

std::vector<CandidateList> random_candidate_lists(int beams, int k, Rng& rng) {
  std::vector<CandidateList> lists(beams);
  for (int b = 0; b < beams; ++b) {
    // Beam scores differ so some lists dominate and others are cut early.
    const double base = -static_cast<double>(rng.below(64)) / 8.0;
    auto& list = lists[b];
    list.resize(k);
    for (int i = 0; i < k; ++i) {
      list[i].beam = b;
      list[i].token = i;
      list[i].score = base - static_cast<double>(rng.below(512)) / 64.0;
    }
    std::sort(list.begin(), list.end(), ranks_before);
  }
  return lists;
}

std::vector<Candidate> sort_oracle(const std::vector<CandidateList>& lists,
                                   int beam_width) {
  std::vector<Candidate> all;
  for (const auto& list : lists) {
    all.insert(all.end(), list.begin(), list.end());
  }
  std::sort(all.begin(), all.end(), ranks_before);
  all.resize(std::min<std::size_t>(all.size(), beam_width));
  return all;
}

}  // namespace grserve::validate
