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
#include <string>
#include <vector>

namespace grserve {

// Added to the logits of tokens that cannot extend any valid item. Finite
// so masked rows stay finite through log-softmax.
inline constexpr float kNegMask = -1e9f;

// A masked logit at or below this bound marks an invalid token.
inline constexpr float kMaskedBound = kNegMask / 2;

// Trie of valid item tuples (each exactly `depth` tokens) stored in CSR
// form. Node 0 is the root; the children of a node are a contiguous,
// token-sorted run of node ids. Immutable after build and shareable.
class ItemVocabulary {
 public:
  ItemVocabulary() = default;

  // `items` holds tuples back to back ([count][depth]). Duplicates are
  // dropped. Wrong arity or out-of-range tokens raise an input error.
  static ItemVocabulary build(std::span<const int> items, int depth,
                              int vocab_size);

  int depth() const noexcept { return depth_; }
  int vocab_size() const noexcept { return vocab_size_; }
  std::size_t item_count() const noexcept { return item_count_; }
  std::size_t node_count() const noexcept { return token_.size(); }

  // Node reached by `prefix`, or -1 when no item starts with it.
  int find(std::span<const int> prefix) const;
  // Child node of `node` labelled `token`, or -1.
  int child(int node, int token) const;
  // Sorted child tokens of `node`.
  std::span<const int> child_tokens(int node) const;
  // Child tokens after `prefix`; empty when the prefix is unreachable.
  std::span<const int> children(std::span<const int> prefix) const;
  bool contains(std::span<const int> tuple) const;

  // Dense [vocab] mask for the empty prefix, built at load.
  std::span<const float> level1_mask() const noexcept { return level1_mask_; }

  // Optional dense masks for every one-token prefix ([vocab][vocab]).
  void build_first_token_masks();
  bool has_first_token_masks() const noexcept {
    return !first_token_masks_.empty();
  }
  // Requires build_first_token_masks(); empty span when `token` has no
  // children.
  std::span<const float> first_token_mask(int token) const;

  // Every stored tuple in lexicographic order ([count][depth]).
  std::vector<int> items() const;

 private:
  int depth_ = 0;
  int vocab_size_ = 0;
  std::size_t item_count_ = 0;
  // Per node: label token (root: -1) and the [begin, end) child run.
  std::vector<int> token_;
  std::vector<int> child_begin_;
  std::vector<int> child_end_;
  std::vector<float> level1_mask_;
  std::vector<float> first_token_masks_;
};

// One item per line, `depth` whitespace-separated token ids. Blank lines
// are skipped. Missing files raise an I/O error; malformed lines an input
// error naming the line.
ItemVocabulary load_vocabulary(const std::string& path, int depth,
                               int vocab_size);
void save_vocabulary(const ItemVocabulary& vocab, const std::string& path);

// `count` uniformly drawn tuples (duplicates dropped, so the stored count
// may be lower).
ItemVocabulary random_vocabulary(int depth, int vocab_size, std::size_t count,
                                 std::uint64_t seed);

// Exactly round(density * vocab_size^depth) distinct tuples chosen
// uniformly from the full tuple space, which must hold at most 2^24 tuples.
// At least one tuple is always kept.
ItemVocabulary planted_vocabulary(int depth, int vocab_size, double density,
                                  std::uint64_t seed);

}  // namespace grserve
