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

#include "beam/beam_search.h"

#include <algorithm>
#include <string>

#include "common/errors.h"

namespace grserve {

void BeamConfig::validate(int vocab_size) const {
  require(beam_width >= 1 && top_k >= 1 && decode_steps >= 1,
          ErrorCode::kConfig, "beam bw, k and nd must be >= 1");
  require(top_k <= vocab_size, ErrorCode::kConfig,
          "k exceeds the vocabulary size");
}

BeamSearch::BeamSearch(const BeamConfig& config, const ItemVocabulary* vocab,
                       int vocab_size)
    : config_(config),
      vocab_(vocab),
      vocab_size_(vocab_size),
      pool_(config.beam_width, config.decode_steps) {
  config_.validate(vocab_size);
  if (config_.masking) {
    require(vocab_ != nullptr, ErrorCode::kConfig,
            "masking needs an item vocabulary");
    require(vocab_->vocab_size() == vocab_size &&
                vocab_->depth() == config_.decode_steps,
            ErrorCode::kConfig,
            "item vocabulary does not match vocab_size and nd");
    require(!config_.first_token_masks || vocab_->has_first_token_masks(),
            ErrorCode::kConfig, "vocabulary lacks first-token masks");
    masks_.reserve(config_.beam_width);
    for (int b = 0; b < config_.beam_width; ++b) {
      masks_.emplace_back(vocab_size);
    }
  }
  lists_.resize(config_.beam_width);
  for (auto& list : lists_) {
    list.reserve(std::max(config_.top_k, config_.beam_width));
  }
  scratch_.reserve(vocab_size);
  selected_.reserve(config_.beam_width);
}

void BeamSearch::reset() noexcept {
  pool_.reset();
  masks_level_ = -1;
  stats_ = SelectionStats{};
}

void BeamSearch::prepare_masks() {
  require(!done(), ErrorCode::kState, "search already finished");
  if (!config_.masking || masks_level_ == level()) {
    return;
  }
  const int lvl = level();
  if (lvl == 0) {
    mask_for_prefix(*vocab_, {}, masks_[0], MaskMode::kDense);
  } else {
    const MaskMode mode = lvl == 1 && config_.first_token_masks
                              ? MaskMode::kDense
                              : MaskMode::kSparse;
    for (int b = 0; b < pool_.live(); ++b) {
      mask_for_prefix(*vocab_, pool_.tokens(b), masks_[b], mode);
    }
  }
  masks_level_ = lvl;
}

const ReorderPlan& BeamSearch::select(std::span<float> logits) {
  require(!done(), ErrorCode::kState, "search already finished");
  const int lvl = level();
  const int rows = lvl == 0 ? 1 : pool_.live();
  require(logits.size() == static_cast<std::size_t>(rows) * vocab_size_,
          ErrorCode::kShape,
          "expected " + std::to_string(rows) + " logits rows");
  if (config_.masking) {
    prepare_masks();
  }
  for (int b = 0; b < rows; ++b) {
    auto row = logits.subspan(static_cast<std::size_t>(b) * vocab_size_,
                              vocab_size_);
    if (config_.masking) {
      apply_mask(row, masks_[b]);
    }
    // Level 0 beams are identical, so one row yields distinct tokens. A
    // width above V leaves the pool under-full until level 1.
    const int k =
        lvl == 0 ? std::min(config_.beam_width, vocab_size_) : config_.top_k;
    per_beam_topk(row, b, pool_.score(b), k, scratch_, lists_[b]);
  }
  if (lvl == 0) {
    selected_.assign(lists_[0].begin(), lists_[0].end());
    stats_.visited += selected_.size();
  } else {
    select_top_bw(std::span<const CandidateList>(lists_).first(rows),
                  config_.beam_width, selected_, &stats_);
  }
  return pool_.commit_step(selected_, lvl);
}

void to_json(nlohmann::json& j, const BeamConfig& c) {
  j = nlohmann::json{{"bw", c.beam_width},
                     {"k", c.top_k},
                     {"nd", c.decode_steps},
                     {"masking", c.masking},
                     {"first_token_masks", c.first_token_masks}};
}

void from_json(const nlohmann::json& j, BeamConfig& c) {
  require(j.is_object(), ErrorCode::kConfig, "beam config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "bw") {
      c.beam_width = value.get<int>();
    } else if (key == "k") {
      c.top_k = value.get<int>();
    } else if (key == "nd") {
      c.decode_steps = value.get<int>();
    } else if (key == "masking") {
      c.masking = value.get<bool>();
    } else if (key == "first_token_masks") {
      c.first_token_masks = value.get<bool>();
    } else {
      fail(ErrorCode::kConfig, "unknown beam config key '" + key + "'");
    }
  }
}

}  // namespace grserve
