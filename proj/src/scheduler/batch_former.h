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
#include <deque>
#include <optional>
#include <vector>

#include "scheduler/request.h"

namespace grserve {

// FIFO queue plus the token-capacity batching rule. Starting at the head,
// requests with the head's parameters are packed in arrival order until
// the next one would overflow the capacity; requests with other
// parameters are skipped and keep their place. The batch is dispatched
// when that overflow happens (the batch is full) or once the head has
// waited wait_quota; otherwise the former keeps waiting for more work. A
// head whose prompt alone exceeds the capacity leaves at once as a solo
// batch flagged oversize.
class BatchFormer {
 public:
  BatchFormer(std::size_t max_tokens, double wait_quota_us);

  void push(Request request);
  std::optional<Batch> form(double now_us);

  std::size_t size() const noexcept { return queue_.size(); }
  bool empty() const noexcept { return queue_.empty(); }
  // When the head's quota expires; infinity on an empty queue.
  double head_deadline_us() const noexcept;

 private:
  std::size_t max_tokens_;
  double wait_quota_us_;
  std::deque<Request> queue_;
  std::uint64_t next_batch_id_ = 0;
};

// Least outstanding tokens wins; ties go to the lowest lane id.
class LaneSelector {
 public:
  explicit LaneSelector(int lanes);

  int pick() const noexcept;
  void assign(int lane, std::size_t tokens);
  void complete(int lane, std::size_t tokens);
  std::size_t load(int lane) const { return loads_.at(lane); }
  int lanes() const noexcept { return static_cast<int>(loads_.size()); }

 private:
  std::vector<std::size_t> loads_;
};

}  // namespace grserve
