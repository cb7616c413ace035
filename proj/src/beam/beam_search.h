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

#include <json.hpp>

#include "beam/beam_pool.h"
#include "beam/mask.h"
#include "beam/selection.h"
#include "beam/vocabulary.h"

namespace grserve {

struct BeamConfig {
  int beam_width = 8;
  int top_k = 8;
  int decode_steps = 3;
  bool masking = true;
  // Dense masks for one-token prefixes, precomputed per vocabulary.
  bool first_token_masks = false;

  void validate(int vocab_size) const;
  bool operator==(const BeamConfig&) const = default;
};

// Per-request constrained beam search state. Level 0 picks the top
// beam_width distinct tokens from the prefill row; each later level takes
// the top_k valid tokens of every live beam and keeps the global top
// beam_width. Buffers are sized at construction; steady-state levels do
// not allocate.
class BeamSearch {
 public:
  // `vocab` may be null only when masking is off.
  BeamSearch(const BeamConfig& config, const ItemVocabulary* vocab,
             int vocab_size);

  void reset() noexcept;

  const BeamConfig& config() const noexcept { return config_; }
  int level() const noexcept { return pool_.steps(); }
  bool done() const noexcept { return level() == config_.decode_steps; }
  const BeamPool& pool() const noexcept { return pool_; }
  int live() const noexcept { return pool_.live(); }
  std::span<const int> tips() const noexcept { return pool_.tips(); }
  const SelectionStats& stats() const noexcept { return stats_; }

  // Builds the masks for the current level from the live prefixes. Host
  // work that may overlap the model forward producing this level's logits.
  void prepare_masks();

  // Consumes this level's logits (level 0: one row; later: [live][vocab]),
  // masking them in place, and commits the selection. The returned plan
  // reorders per-beam caches to the new slot order.
  const ReorderPlan& select(std::span<float> logits);

  std::vector<FinalItem> final_items() const { return pool_.final_items(); }

 private:
  BeamConfig config_;
  const ItemVocabulary* vocab_;
  int vocab_size_;
  BeamPool pool_;
  std::vector<MaskBuffer> masks_;
  int masks_level_ = -1;
  std::vector<CandidateList> lists_;
  CandidateList scratch_;
  CandidateList selected_;
  SelectionStats stats_;
};

void to_json(nlohmann::json& j, const BeamConfig& c);
// Unknown keys are rejected; missing keys keep their defaults.
void from_json(const nlohmann::json& j, BeamConfig& c);

}  // namespace grserve
