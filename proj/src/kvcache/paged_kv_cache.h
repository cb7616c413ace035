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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace grserve {

struct PagedKvConfig {
  std::size_t block_size = 16;
  std::size_t num_blocks = 1 << 16;
  // Floats stored per token slot. Zero gives an accounting-only cache.
  std::size_t token_width = 0;
};

// Block-granular KV manager with copy-on-write sharing, used as the
// comparison baseline for the separated caches.
//
// Beams reference blocks through per-beam block tables. After fork() a
// partially filled tip block that is referenced by more than one beam is
// marked copy-on-write; every beam that then appends into it receives its
// own physical copy, and the original is freed once its last reference
// goes away.
class PagedKvCache {
 public:
  explicit PagedKvCache(PagedKvConfig config);

  // Writes the prompt into fresh blocks and shares them with `beam_width`
  // beams. `payload` is [prompt_len][token_width] or empty.
  void init_prompt(std::size_t prompt_len, int beam_width,
                   std::span<const float> payload = {});

  // New beam b continues old beam selected_src[b]. References of the old
  // tables are released once the new tables are built.
  void fork(std::span<const int> selected_src);

  // Reserves one token slot at the end of every beam, copying shared tip
  // blocks and allocating new blocks as needed. Returns nothing; the slot
  // is addressed through slot().
  void append_slots();

  // fork() + append_slots() + write the new tokens ([beams][token_width]).
  void fork_and_append(std::span<const int> selected_src,
                       std::span<const float> new_tokens = {});

  std::span<float> slot(int beam, std::size_t position);
  std::span<const float> slot(int beam, std::size_t position) const;

  // Copies the whole sequence of `beam` into out ([length][token_width]),
  // following the block table.
  void gather(int beam, std::span<float> out) const;
  // Like gather(), but copies only floats [offset, offset + count) of each
  // token into out ([length][count]).
  void gather_range(int beam, std::size_t offset, std::size_t count,
                    std::span<float> out) const;

  int beam_count() const noexcept { return static_cast<int>(tables_.size()); }
  std::size_t sequence_length(int beam) const { return lengths_.at(beam); }
  std::size_t block_size() const noexcept { return config_.block_size; }
  std::size_t token_width() const noexcept { return config_.token_width; }

  std::uint64_t copy_count() const noexcept { return copy_count_; }
  std::size_t allocated_blocks() const noexcept { return allocated_; }
  std::size_t peak_blocks() const noexcept { return peak_allocated_; }
  std::uint64_t peak_token_slots() const noexcept {
    return static_cast<std::uint64_t>(peak_allocated_) * config_.block_size;
  }
  std::uint64_t tokens_copied() const noexcept { return tokens_copied_; }

  // Sum of table references equals the sum of block refcounts, and no free
  // block is referenced.
  bool refcounts_consistent() const;

  // Drops every table and frees every block; counters are kept.
  void release_all();
  // Zeroes the copy counters and restarts the peak at the current usage.
  void reset_stats() noexcept;
  const PagedKvConfig& config() const noexcept { return config_; }

 private:
  std::uint32_t allocate_block();
  void add_ref(std::uint32_t block);
  void release(std::uint32_t block);
  float* block_data(std::uint32_t block);
  const float* block_data(std::uint32_t block) const;

  PagedKvConfig config_;
  std::vector<float> storage_;
  std::vector<std::uint32_t> refcount_;
  std::vector<std::uint8_t> copy_on_write_;
  std::vector<std::uint32_t> free_list_;
  std::vector<std::vector<std::uint32_t>> tables_;
  std::vector<std::vector<std::uint32_t>> scratch_tables_;
  std::vector<std::size_t> lengths_;
  std::vector<std::size_t> scratch_lengths_;
  std::size_t allocated_ = 0;
  std::size_t peak_allocated_ = 0;
  std::uint64_t copy_count_ = 0;
  std::uint64_t tokens_copied_ = 0;
};

// Blocks that always suffice for one request: the prompt plus, per beam,
// its tail blocks for `steps` tokens, counted twice because old and new
// tables coexist during a fork.
std::size_t paged_blocks_needed(std::size_t prompt_len, int beam_width,
                                int steps, std::size_t block_size);

}  // namespace grserve
