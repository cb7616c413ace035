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

#include "beam/mask.h"

#include <algorithm>
#include <string>

#include "common/errors.h"

namespace grserve {

MaskBuffer::MaskBuffer(int vocab_size) : values_(vocab_size, kNegMask) {
  touched_.reserve(vocab_size);
}

void MaskBuffer::reset() noexcept {
  for (int t : touched_) {
    values_[t] = kNegMask;
  }
  touched_.clear();
}

void MaskBuffer::allow(int token) noexcept {
  if (values_[token] != 0.0f) {
    values_[token] = 0.0f;
    touched_.push_back(token);
  }
}

void MaskBuffer::assign_dense(std::span<const float> mask,
                              std::span<const int> zero_positions) {
  require(mask.size() == values_.size(), ErrorCode::kShape,
          "dense mask size mismatch");
  std::copy(mask.begin(), mask.end(), values_.begin());
  touched_.assign(zero_positions.begin(), zero_positions.end());
}

void MaskBuffer::allow_all() noexcept {
  std::fill(values_.begin(), values_.end(), 0.0f);
  touched_.resize(values_.size());
  for (std::size_t i = 0; i < touched_.size(); ++i) {
    touched_[i] = static_cast<int>(i);
  }
}

void mask_for_prefix(const ItemVocabulary& vocab, std::span<const int> prefix,
                     MaskBuffer& buf, MaskMode mode) {
  require(buf.vocab_size() == vocab.vocab_size(), ErrorCode::kShape,
          "mask buffer size does not match the vocabulary");
  require(prefix.size() < static_cast<std::size_t>(vocab.depth()),
          ErrorCode::kInput, "prefix must be shorter than the item depth");
  const int node = vocab.find(prefix);
  require(node >= 0, ErrorCode::kDeadPrefix,
          "prefix of length " + std::to_string(prefix.size()) +
              " extends to no item");
  if (mode == MaskMode::kDense) {
    if (prefix.empty()) {
      buf.assign_dense(vocab.level1_mask(), vocab.child_tokens(0));
      return;
    }
    require(prefix.size() == 1 && vocab.has_first_token_masks(),
            ErrorCode::kInput,
            "dense masks exist only for the empty and first-token prefixes");
    buf.assign_dense(vocab.first_token_mask(prefix[0]),
                     vocab.child_tokens(node));
    return;
  }
  buf.reset();
  for (int t : vocab.child_tokens(node)) {
    buf.allow(t);
  }
}

void apply_mask(std::span<float> row, const MaskBuffer& buf) {
  const auto mask = buf.values();
  require(row.size() == mask.size(), ErrorCode::kShape,
          "logits row and mask differ in size");
  for (std::size_t i = 0; i < row.size(); ++i) {
    row[i] += mask[i];
  }
}

}  // namespace grserve
