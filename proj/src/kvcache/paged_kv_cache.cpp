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

#include "kvcache/paged_kv_cache.h"

#include <algorithm>
#include <numeric>
#include <string>

#include "common/errors.h"

namespace grserve {

PagedKvCache::PagedKvCache(PagedKvConfig config) : config_(config) {
  require(config_.block_size >= 1 && config_.num_blocks >= 1,
          ErrorCode::kConfig, "paged cache needs positive block size and pool");
  refcount_.assign(config_.num_blocks, 0);
  copy_on_write_.assign(config_.num_blocks, 0);
  free_list_.resize(config_.num_blocks);
  // Pop from the back, so block 0 is handed out first.
  std::iota(free_list_.rbegin(), free_list_.rend(), 0u);
  if (config_.token_width > 0) {
    storage_.resize(config_.num_blocks * config_.block_size *
                    config_.token_width);
  }
}

std::uint32_t PagedKvCache::allocate_block() {
  if (free_list_.empty()) {
    fail(ErrorCode::kOutOfMemory,
         "paged KV pool exhausted (" + std::to_string(config_.num_blocks) +
             " blocks)");
  }
  const std::uint32_t block = free_list_.back();
  free_list_.pop_back();
  refcount_[block] = 1;
  copy_on_write_[block] = 0;
  ++allocated_;
  peak_allocated_ = std::max(peak_allocated_, allocated_);
  return block;
}

void PagedKvCache::add_ref(std::uint32_t block) { ++refcount_[block]; }

void PagedKvCache::release(std::uint32_t block) {
  if (--refcount_[block] == 0) {
    copy_on_write_[block] = 0;
    free_list_.push_back(block);
    --allocated_;
  }
}

float* PagedKvCache::block_data(std::uint32_t block) {
  return storage_.data() + block * config_.block_size * config_.token_width;
}

const float* PagedKvCache::block_data(std::uint32_t block) const {
  return storage_.data() + block * config_.block_size * config_.token_width;
}

void PagedKvCache::init_prompt(std::size_t prompt_len, int beam_width,
                               std::span<const float> payload) {
  require(tables_.empty(), ErrorCode::kState, "paged cache already in use");
  require(prompt_len >= 1 && beam_width >= 1, ErrorCode::kConfig,
          "prompt length and beam width must be positive");
  require(payload.empty() || payload.size() == prompt_len * config_.token_width,
          ErrorCode::kShape, "prompt payload size mismatch");
  const std::size_t bs = config_.block_size;
  const std::size_t nblocks = (prompt_len + bs - 1) / bs;
  std::vector<std::uint32_t> table;
  table.reserve(nblocks);
  for (std::size_t i = 0; i < nblocks; ++i) {
    table.push_back(allocate_block());
  }
  if (!payload.empty() && config_.token_width > 0) {
    for (std::size_t t = 0; t < prompt_len; ++t) {
      std::copy_n(payload.begin() + t * config_.token_width,
                  config_.token_width,
                  block_data(table[t / bs]) + (t % bs) * config_.token_width);
    }
  }
  tables_.assign(beam_width, table);
  lengths_.assign(beam_width, prompt_len);
  for (std::uint32_t b : table) {
    refcount_[b] = static_cast<std::uint32_t>(beam_width);
  }
  if (prompt_len % bs != 0 && beam_width > 1) {
    copy_on_write_[table.back()] = 1;
  }
}

void PagedKvCache::fork(std::span<const int> selected_src) {
  const int old_beams = beam_count();
  require(old_beams > 0, ErrorCode::kState, "fork before init_prompt");
  require(!selected_src.empty(), ErrorCode::kPlan, "empty selection");
  for (int s : selected_src) {
    require(s >= 0 && s < old_beams, ErrorCode::kPlan,
            "fork source " + std::to_string(s) + " out of range");
  }
  scratch_tables_.resize(selected_src.size());
  scratch_lengths_.resize(selected_src.size());
  for (std::size_t b = 0; b < selected_src.size(); ++b) {
    const auto& parent = tables_[selected_src[b]];
    scratch_tables_[b].assign(parent.begin(), parent.end());
    scratch_lengths_[b] = lengths_[selected_src[b]];
    for (std::uint32_t block : parent) {
      add_ref(block);
    }
  }
  for (const auto& table : tables_) {
    for (std::uint32_t block : table) {
      release(block);
    }
  }
  tables_.swap(scratch_tables_);
  lengths_.swap(scratch_lengths_);
  // Snapshot sharing of partially filled tips: each forking beam copies.
  const std::size_t bs = config_.block_size;
  for (std::size_t b = 0; b < tables_.size(); ++b) {
    if (lengths_[b] % bs != 0 && !tables_[b].empty()) {
      const std::uint32_t tip = tables_[b].back();
      copy_on_write_[tip] = refcount_[tip] > 1 ? 1 : 0;
    }
  }
}

void PagedKvCache::append_slots() {
  const std::size_t bs = config_.block_size;
  const std::size_t width = config_.token_width;
  for (std::size_t b = 0; b < tables_.size(); ++b) {
    auto& table = tables_[b];
    const std::size_t fill = lengths_[b] % bs;
    if (fill == 0 || table.empty()) {
      table.push_back(allocate_block());
    } else if (copy_on_write_[table.back()] != 0) {
      const std::uint32_t old_tip = table.back();
      const std::uint32_t fresh = allocate_block();
      if (width > 0) {
        std::copy_n(block_data(old_tip), fill * width, block_data(fresh));
      }
      ++copy_count_;
      tokens_copied_ += fill;
      table.back() = fresh;
      release(old_tip);
    }
    ++lengths_[b];
  }
}

void PagedKvCache::fork_and_append(std::span<const int> selected_src,
                                   std::span<const float> new_tokens) {
  require(new_tokens.empty() ||
              new_tokens.size() == selected_src.size() * config_.token_width,
          ErrorCode::kShape, "new token payload size mismatch");
  fork(selected_src);
  append_slots();
  if (!new_tokens.empty() && config_.token_width > 0) {
    for (std::size_t b = 0; b < tables_.size(); ++b) {
      auto dst = slot(static_cast<int>(b), lengths_[b] - 1);
      std::copy_n(new_tokens.begin() + b * config_.token_width,
                  config_.token_width, dst.begin());
    }
  }
}

std::span<float> PagedKvCache::slot(int beam, std::size_t position) {
  require(beam >= 0 && beam < beam_count() && position < lengths_[beam],
          ErrorCode::kShape, "slot out of range");
  require(config_.token_width > 0, ErrorCode::kState,
          "accounting-only cache has no payload");
  const std::size_t bs = config_.block_size;
  return std::span<float>(
      block_data(tables_[beam][position / bs]) +
          (position % bs) * config_.token_width,
      config_.token_width);
}

std::span<const float> PagedKvCache::slot(int beam,
                                          std::size_t position) const {
  return const_cast<PagedKvCache*>(this)->slot(beam, position);
}

void PagedKvCache::gather(int beam, std::span<float> out) const {
  require(beam >= 0 && beam < beam_count(), ErrorCode::kShape,
          "beam out of range");
  const std::size_t len = lengths_[beam];
  const std::size_t width = config_.token_width;
  require(out.size() >= len * width, ErrorCode::kShape,
          "gather buffer too small");
  const std::size_t bs = config_.block_size;
  const auto& table = tables_[beam];
  for (std::size_t i = 0; i < table.size(); ++i) {
    const std::size_t first = i * bs;
    const std::size_t n = std::min(bs, len - first);
    std::copy_n(block_data(table[i]), n * width, out.begin() + first * width);
  }
}

void PagedKvCache::gather_range(int beam, std::size_t offset,
                                std::size_t count, std::span<float> out) const {
  require(beam >= 0 && beam < beam_count(), ErrorCode::kShape,
          "beam out of range");
  const std::size_t width = config_.token_width;
  require(offset + count <= width, ErrorCode::kShape,
          "gather range exceeds token width");
  const std::size_t len = lengths_[beam];
  require(out.size() >= len * count, ErrorCode::kShape,
          "gather buffer too small");
  const std::size_t bs = config_.block_size;
  const auto& table = tables_[beam];
  for (std::size_t t = 0; t < len; ++t) {
    const float* src = block_data(table[t / bs]) + (t % bs) * width + offset;
    std::copy_n(src, count, out.begin() + t * count);
  }
}

bool PagedKvCache::refcounts_consistent() const {
  std::vector<std::uint64_t> refs(config_.num_blocks, 0);
  for (const auto& table : tables_) {
    for (std::uint32_t block : table) {
      ++refs[block];
    }
  }
  std::vector<std::uint8_t> is_free(config_.num_blocks, 0);
  for (std::uint32_t block : free_list_) {
    is_free[block] = 1;
  }
  std::size_t live = 0;
  for (std::size_t b = 0; b < config_.num_blocks; ++b) {
    if (refs[b] != refcount_[b]) {
      return false;
    }
    if (is_free[b] != 0 && refs[b] != 0) {
      return false;
    }
    if (refcount_[b] > 0) {
      ++live;
    }
  }
  return live == allocated_;
}

void PagedKvCache::release_all() {
  for (const auto& table : tables_) {
    for (std::uint32_t block : table) {
      release(block);
    }
  }
  tables_.clear();
  lengths_.clear();
}

void PagedKvCache::reset_stats() noexcept {
  copy_count_ = 0;
  tokens_copied_ = 0;
  peak_allocated_ = allocated_;
}

std::size_t paged_blocks_needed(std::size_t prompt_len, int beam_width,
                                int steps, std::size_t block_size) {
  const std::size_t prompt_blocks = (prompt_len + block_size - 1) / block_size;
  const std::size_t tail_blocks =
      (static_cast<std::size_t>(steps) + block_size - 1) / block_size + 1;
  // Old and new tables coexist during a fork.
  return prompt_blocks + 2 * static_cast<std::size_t>(beam_width) *
                             tail_blocks + 1;
}

}  // namespace grserve
