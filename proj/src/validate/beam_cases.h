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

#include <vector>

#include "beam/selection.h"
#include "common/rng.h"

namespace grserve::validate {

// `beams` descending candidate lists of length k. Scores are drawn on a
// coarse grid so exact ties, and therefore the tie-break order, occur
// often.
std::vector<CandidateList> random_candidate_lists(int beams, int k, Rng& rng);

// Flattens and fully sorts under ranks_before, keeping the first
// beam_width entries.
std::vector<Candidate> sort_oracle(const std::vector<CandidateList>& lists,
                                   int beam_width);

}  // namespace grserve::validate
