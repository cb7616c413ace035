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

#include "beam/beam_pool.h"

#include <algorithm>
#include <string>

#include "common/errors.h"

namespace grserve {

BeamPool::BeamPool(int beam_width, int decode_steps)
    : beam_width_(beam_width), decode_steps_(decode_steps), plan_(beam_width) {
  require(beam_width >= 1 && decode_steps >= 1, ErrorCode::kConfig,
          "beam pool needs beam_width and decode_steps >= 1");
  const std::size_t cells = static_cast<std::size_t>(beam_width) * decode_steps;
  tokens_.assign(cells, -1);
  log_probs_.assign(cells, 0.0);
  next_tokens_.assign(cells, -1);
  next_log_probs_.assign(cells, 0.0);
  scores_.assign(beam_width, 0.0);
  next_scores_.assign(beam_width, 0.0);
  tips_.assign(beam_width, -1);
  src_.reserve(beam_width);
}

void BeamPool::reset() noexcept {
  live_ = 1;
  steps_ = 0;
  scores_[0] = 0.0;
}

std::span<const int> BeamPool::tokens(int slot) const {
  require(slot >= 0 && slot < live_, ErrorCode::kState, "slot not live");
  return std::span<const int>(tokens_).subspan(
      static_cast<std::size_t>(slot) * decode_steps_, steps_);
}

std::span<const double> BeamPool::step_log_probs(int slot) const {
  require(slot >= 0 && slot < live_, ErrorCode::kState, "slot not live");
  return std::span<const double>(log_probs_)
      .subspan(static_cast<std::size_t>(slot) * decode_steps_, steps_);
}

double BeamPool::score(int slot) const {
  require(slot >= 0 && slot < live_, ErrorCode::kState, "slot not live");
  return scores_[slot];
}

std::span<const int> BeamPool::tips() const noexcept {
  return std::span<const int>(tips_).first(steps_ > 0 ? live_ : 0);
}

const ReorderPlan& BeamPool::commit_step(std::span<const Candidate> selected,
                                         int step) {
  require(step == steps_ && step < decode_steps_, ErrorCode::kState,
          "commit of step " + std::to_string(step) + " but pool holds " +
              std::to_string(steps_) + " of " + std::to_string(decode_steps_));
  require(!selected.empty() &&
              selected.size() <= static_cast<std::size_t>(beam_width_),
          ErrorCode::kState, "selection size out of range");
  src_.clear();
  for (const Candidate& c : selected) {
    require(c.beam >= 0 && c.beam < live_, ErrorCode::kState,
            "candidate refers to beam " + std::to_string(c.beam) +
                " outside the live set");
    src_.push_back(c.beam);
  }
  plan_reorder(src_, beam_width_, plan_);

  const std::size_t row = decode_steps_;
  for (std::size_t i = 0; i < plan_.size(); ++i) {
    const Candidate& c = selected[plan_.perm[i]];
    const std::size_t from = static_cast<std::size_t>(c.beam) * row;
    const std::size_t to = i * row;
    std::copy_n(tokens_.begin() + from, step, next_tokens_.begin() + to);
    std::copy_n(log_probs_.begin() + from, step, next_log_probs_.begin() + to);
    next_tokens_[to + step] = c.token;
    next_log_probs_[to + step] = c.score - scores_[c.beam];
    next_scores_[i] = c.score;
    tips_[i] = c.token;
  }
  tokens_.swap(next_tokens_);
  log_probs_.swap(next_log_probs_);
  scores_.swap(next_scores_);
  live_ = static_cast<int>(plan_.size());
  steps_ = step + 1;
  return plan_;
}

std::vector<FinalItem> BeamPool::final_items() const {
  require(steps_ == decode_steps_, ErrorCode::kState,
          "final items requested before the last step");
  std::vector<FinalItem> items;
  items.reserve(live_);
  for (int b = 0; b < live_; ++b) {
    const auto t = tokens(b);
    items.push_back(FinalItem{std::vector<int>(t.begin(), t.end()), scores_[b]});
  }
  std::sort(items.begin(), items.end(),
            [](const FinalItem& a, const FinalItem& b) {
              if (a.score != b.score) {
                return a.score > b.score;
              }
              return a.tokens < b.tokens;
            });
  return items;
}

}  // namespace grserve
