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

#include "beam/vocabulary.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "common/errors.h"
#include "common/rng.h"

namespace grserve {

ItemVocabulary ItemVocabulary::build(std::span<const int> items, int depth,
                                     int vocab_size) {
  require(depth >= 1, ErrorCode::kConfig, "vocabulary depth must be >= 1");
  require(vocab_size >= 1, ErrorCode::kConfig, "vocab_size must be >= 1");
  require(items.size() % depth == 0, ErrorCode::kInput,
          "item list length is not a multiple of the item arity");
  for (int t : items) {
    require(t >= 0 && t < vocab_size, ErrorCode::kInput,
            "item token " + std::to_string(t) + " outside [0, " +
                std::to_string(vocab_size) + ")");
  }
  const std::size_t n = items.size() / depth;
  auto tuple = [&](std::size_t i) { return items.subspan(i * depth, depth); };
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) {
    const auto ta = tuple(a);
    const auto tb = tuple(b);
    return std::lexicographical_compare(ta.begin(), ta.end(), tb.begin(),
                                        tb.end());
  };
  std::sort(order.begin(), order.end(), less);
  order.erase(std::unique(order.begin(), order.end(),
                          [&](std::size_t a, std::size_t b) {
                            const auto ta = tuple(a);
                            const auto tb = tuple(b);
                            return std::equal(ta.begin(), ta.end(),
                                              tb.begin());
                          }),
              order.end());

  ItemVocabulary v;
  v.depth_ = depth;
  v.vocab_size_ = vocab_size;
  v.item_count_ = order.size();
  v.token_.push_back(-1);
  v.child_begin_.push_back(0);
  v.child_end_.push_back(0);

  // Level by level: nodes at depth d+1 are the distinct length-(d+1)
  // prefixes in sorted order, so each parent's children form one run.
  std::vector<int> parent_of(order.size(), 0);
  for (int d = 0; d < depth; ++d) {
    std::vector<int> node_of(order.size());
    int last_parent = -1;
    int last_token = -1;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const int parent = parent_of[i];
      const int token = tuple(order[i])[d];
      if (parent != last_parent || token != last_token) {
        const int id = static_cast<int>(v.token_.size());
        v.token_.push_back(token);
        v.child_begin_.push_back(0);
        v.child_end_.push_back(0);
        if (parent != last_parent) {
          v.child_begin_[parent] = id;
        }
        v.child_end_[parent] = id + 1;
        last_parent = parent;
        last_token = token;
      }
      node_of[i] = static_cast<int>(v.token_.size()) - 1;
    }
    parent_of = std::move(node_of);
  }

  v.level1_mask_.assign(vocab_size, kNegMask);
  for (int t : v.child_tokens(0)) {
    v.level1_mask_[t] = 0.0f;
  }
  return v;
}

int ItemVocabulary::child(int node, int token) const {
  if (node < 0 || static_cast<std::size_t>(node) >= token_.size()) {
    return -1;
  }
  const auto first = token_.begin() + child_begin_[node];
  const auto last = token_.begin() + child_end_[node];
  const auto it = std::lower_bound(first, last, token);
  if (it == last || *it != token) {
    return -1;
  }
  return static_cast<int>(it - token_.begin());
}

int ItemVocabulary::find(std::span<const int> prefix) const {
  if (token_.empty() || prefix.size() > static_cast<std::size_t>(depth_)) {
    return -1;
  }
  int node = 0;
  for (int t : prefix) {
    node = child(node, t);
    if (node < 0) {
      return -1;
    }
  }
  return node;
}

std::span<const int> ItemVocabulary::child_tokens(int node) const {
  if (node < 0 || static_cast<std::size_t>(node) >= token_.size()) {
    return {};
  }
  return std::span<const int>(token_).subspan(
      child_begin_[node], child_end_[node] - child_begin_[node]);
}

std::span<const int> ItemVocabulary::children(
    std::span<const int> prefix) const {
  return child_tokens(find(prefix));
}

bool ItemVocabulary::contains(std::span<const int> tuple) const {
  return tuple.size() == static_cast<std::size_t>(depth_) && find(tuple) >= 0;
}

void ItemVocabulary::build_first_token_masks() {
  first_token_masks_.assign(static_cast<std::size_t>(vocab_size_) * vocab_size_,
                            kNegMask);
  for (int first : child_tokens(0)) {
    float* mask = first_token_masks_.data() +
                  static_cast<std::size_t>(first) * vocab_size_;
    for (int t : child_tokens(child(0, first))) {
      mask[t] = 0.0f;
    }
  }
}

std::span<const float> ItemVocabulary::first_token_mask(int token) const {
  require(has_first_token_masks(), ErrorCode::kState,
          "first-token masks were not built");
  if (child(0, token) < 0) {
    return {};
  }
  return std::span<const float>(first_token_masks_)
      .subspan(static_cast<std::size_t>(token) * vocab_size_, vocab_size_);
}

std::vector<int> ItemVocabulary::items() const {
  std::vector<int> out;
  out.reserve(item_count_ * depth_);
  std::vector<int> path;
  // Depth-first walk in token order reproduces lexicographic order.
  auto walk = [&](auto&& self, int node) -> void {
    if (path.size() == static_cast<std::size_t>(depth_)) {
      out.insert(out.end(), path.begin(), path.end());
      return;
    }
    for (int c = child_begin_[node]; c < child_end_[node]; ++c) {
      path.push_back(token_[c]);
      self(self, c);
      path.pop_back();
    }
  };
  if (!token_.empty()) {
    walk(walk, 0);
  }
  return out;
}

ItemVocabulary load_vocabulary(const std::string& path, int depth,
                               int vocab_size) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open vocabulary file " + path);
  std::vector<int> items;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::vector<int> tuple;
    std::string field;
    while (fields >> field) {
      std::size_t used = 0;
      int value = -1;
      try {
        value = std::stoi(field, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      require(used == field.size(), ErrorCode::kInput,
              path + ":" + std::to_string(line_no) + ": bad token '" + field +
                  "'");
      require(value >= 0 && value < vocab_size, ErrorCode::kInput,
              path + ":" + std::to_string(line_no) + ": token " + field +
                  " outside [0, " + std::to_string(vocab_size) + ")");
      tuple.push_back(value);
    }
    if (tuple.empty()) {
      continue;
    }
    require(tuple.size() == static_cast<std::size_t>(depth), ErrorCode::kInput,
            path + ":" + std::to_string(line_no) + ": expected " +
                std::to_string(depth) + " tokens, got " +
                std::to_string(tuple.size()));
    items.insert(items.end(), tuple.begin(), tuple.end());
  }
  return ItemVocabulary::build(items, depth, vocab_size);
}

void save_vocabulary(const ItemVocabulary& vocab, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write vocabulary file " + path);
  const auto items = vocab.items();
  const std::size_t d = vocab.depth();
  for (std::size_t i = 0; i < items.size(); i += d) {
    for (std::size_t j = 0; j < d; ++j) {
      out << (j ? " " : "") << items[i + j];
    }
    out << '\n';
  }
}

ItemVocabulary random_vocabulary(int depth, int vocab_size, std::size_t count,
                                 std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> items(count * depth);
  for (auto& t : items) {
    t = static_cast<int>(rng.below(vocab_size));
  }
  return ItemVocabulary::build(items, depth, vocab_size);
}

ItemVocabulary planted_vocabulary(int depth, int vocab_size, double density,
                                  std::uint64_t seed) {
  require(density > 0.0 && density <= 1.0, ErrorCode::kConfig,
          "density must lie in (0, 1]");
  const double space = std::pow(static_cast<double>(vocab_size), depth);
  require(space <= double(1 << 24), ErrorCode::kConfig,
          "tuple space too large to enumerate");
  const auto total = static_cast<std::uint64_t>(space);
  const auto keep = std::max<std::uint64_t>(
      1, static_cast<std::uint64_t>(std::llround(density * space)));
  // Partial Fisher-Yates over tuple codes.
  std::vector<std::uint32_t> codes(total);
  std::iota(codes.begin(), codes.end(), 0u);
  Rng rng(seed);
  for (std::uint64_t i = 0; i < keep; ++i) {
    const std::uint64_t j = i + rng.below(total - i);
    std::swap(codes[i], codes[j]);
  }
  std::vector<int> items(keep * depth);
  for (std::uint64_t i = 0; i < keep; ++i) {
    std::uint32_t code = codes[i];
    for (int d = depth - 1; d >= 0; --d) {
      items[i * depth + d] = static_cast<int>(code % vocab_size);
      code /= vocab_size;
    }
  }
  return ItemVocabulary::build(items, depth, vocab_size);
}

}  // namespace grserve
