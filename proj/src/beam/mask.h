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

#include "beam/vocabulary.h"
#include "common/alloc_counter.h"

namespace grserve {

// [vocab] additive mask with entries 0 (allowed) or kNegMask. `touched`
// lists the zeroed positions so a sparse reset costs O(touched).
class MaskBuffer {
 public:
  explicit MaskBuffer(int vocab_size = 0);

  std::span<const float> values() const noexcept { return values_; }
  std::span<const int> touched() const noexcept { return touched_; }
  int vocab_size() const noexcept { return static_cast<int>(values_.size()); }

  // Back to all-kNegMask with an empty touched list.
  void reset() noexcept;
  void allow(int token) noexcept;
  // Overwrites with a dense mask; touched becomes its zero positions.
  void assign_dense(std::span<const float> mask,
                    std::span<const int> zero_positions);
  // Sets every entry to 0 (masking disabled); touched lists them all.
  void allow_all() noexcept;

 private:
  CountedVector<float> values_;
  CountedVector<int> touched_;
};

enum class MaskMode { kDense, kSparse };

// buf[t] = 0 iff prefix + t extends to at least one item. Dense mode copies
// a precomputed mask and is only valid for the empty prefix, or for a
// one-token prefix when the vocabulary holds first-token masks. An
// unreachable prefix raises a dead-prefix error.
void mask_for_prefix(const ItemVocabulary& vocab, std::span<const int> prefix,
                     MaskBuffer& buf, MaskMode mode);

// row[t] += mask[t] in place.
void apply_mask(std::span<float> row, const MaskBuffer& buf);

}  // namespace grserve
