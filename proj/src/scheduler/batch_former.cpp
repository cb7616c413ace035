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

#include "scheduler/batch_former.h"

#include <limits>

#include "common/errors.h"

namespace grserve {

BatchFormer::BatchFormer(std::size_t max_tokens, double wait_quota_us)
    : max_tokens_(max_tokens), wait_quota_us_(wait_quota_us) {
  require(max_tokens >= 1 && wait_quota_us > 0.0, ErrorCode::kConfig,
          "batch capacity and wait quota must be positive");
}

void BatchFormer::push(Request request) {
  require(!request.prompt.empty(), ErrorCode::kInput,
          "request prompt must be non-empty");
  queue_.push_back(std::move(request));
}

double BatchFormer::head_deadline_us() const noexcept {
  if (queue_.empty()) {
    return std::numeric_limits<double>::infinity();
  }
  return queue_.front().arrival_us + wait_quota_us_;
}

std::optional<Batch> BatchFormer::form(double now_us) {
  if (queue_.empty()) {
    return std::nullopt;
  }
  const Request& head = queue_.front();
  if (head.tokens() > max_tokens_) {
    Batch batch;
    batch.id = next_batch_id_++;
    batch.total_tokens = head.tokens();
    batch.formed_us = now_us;
    batch.oversize = true;
    batch.requests.push_back(std::move(queue_.front()));
    queue_.pop_front();
    return batch;
  }

  std::vector<std::size_t> picked;
  std::size_t total = 0;
  bool full = false;
  for (std::size_t i = 0; i < queue_.size(); ++i) {
    const Request& r = queue_[i];
    if (!(r.params == head.params)) {
      continue;
    }
    if (total + r.tokens() > max_tokens_) {
      full = true;
      break;
    }
    total += r.tokens();
    picked.push_back(i);
  }
  const bool expired = now_us - head.arrival_us >= wait_quota_us_;
  if (!full && !expired) {
    return std::nullopt;
  }

  Batch batch;
  batch.id = next_batch_id_++;
  batch.total_tokens = total;
  batch.formed_us = now_us;
  batch.requests.reserve(picked.size());
  for (std::size_t i : picked) {
    batch.requests.push_back(std::move(queue_[i]));
  }
  // Erase picked positions back to front so earlier indices stay valid.
  for (auto it = picked.rbegin(); it != picked.rend(); ++it) {
    queue_.erase(queue_.begin() + static_cast<std::ptrdiff_t>(*it));
  }
  return batch;
}

LaneSelector::LaneSelector(int lanes) {
  require(lanes >= 1, ErrorCode::kConfig, "need at least one lane");
  loads_.assign(lanes, 0);
}

int LaneSelector::pick() const noexcept {
  int best = 0;
  for (int l = 1; l < lanes(); ++l) {
    if (loads_[l] < loads_[best]) {
      best = l;
    }
  }
  return best;
}

void LaneSelector::assign(int lane, std::size_t tokens) {
  loads_.at(lane) += tokens;
}

void LaneSelector::complete(int lane, std::size_t tokens) {
  require(loads_.at(lane) >= tokens, ErrorCode::kState,
          "lane load underflow");
  loads_[lane] -= tokens;
}

}  // namespace grserve
