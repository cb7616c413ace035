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

#include "scheduler/engine.h"

#include "common/errors.h"

namespace grserve {

Engine::Engine(const EngineConfig& config,
               std::shared_ptr<const Weights> weights,
               std::shared_ptr<const ItemVocabulary> vocab)
    : config_(config),
      weights_(std::move(weights)),
      vocab_(std::move(vocab)),
      epoch_(std::chrono::steady_clock::now()),
      former_(config.max_tokens_per_batch, config.wait_quota_us()),
      selector_(config.num_lanes) {
  config_.validate();
  require(weights_ != nullptr, ErrorCode::kConfig, "engine needs weights");
  lanes_.resize(config_.num_lanes);
  for (int l = 0; l < config_.num_lanes; ++l) {
    lanes_[l].runner =
        std::make_unique<BatchRunner>(weights_, vocab_, config_, l);
  }
  for (int l = 0; l < config_.num_lanes; ++l) {
    lanes_[l].thread = std::thread([this, l] { lane_loop(l); });
  }
  admission_ = std::thread([this] { admission_loop(); });
}

Engine::~Engine() { stop(); }

double Engine::now_us() const {
  return std::chrono::duration<double, std::micro>(
             std::chrono::steady_clock::now() - epoch_)
      .count();
}

bool Engine::submit(Request request) {
  validate_request(request, weights_->config, vocab_.get());
  std::lock_guard lock(mu_);
  require(!stopping_, ErrorCode::kState, "engine is draining or stopped");
  if (former_.size() >= config_.queue_capacity) {
    report_.rejected.push_back(request.id);
    return false;
  }
  if (request.arrival_us < 0.0) {
    request.arrival_us = now_us();
  }
  former_.push(std::move(request));
  ++admitted_;
  admit_cv_.notify_one();
  return true;
}

void Engine::dispatch(Batch batch) {
  const int lane = selector_.pick();
  selector_.assign(lane, batch.total_tokens);
  BatchRecord record;
  record.id = batch.id;
  record.lane = lane;
  record.total_tokens = batch.total_tokens;
  record.oversize = batch.oversize;
  record.head_arrival_us = batch.requests.front().arrival_us;
  record.formed_us = batch.formed_us;
  for (const auto& r : batch.requests) {
    record.request_ids.push_back(r.id);
  }
  report_.batches.push_back(std::move(record));
  lanes_[lane].queue.push_back(std::move(batch));
  lane_cv_.notify_all();
}

void Engine::admission_loop() {
  const auto tick = std::chrono::duration<double, std::milli>(config_.tick_ms);
  std::unique_lock lock(mu_);
  while (!stopping_) {
    while (auto batch = former_.form(now_us())) {
      dispatch(std::move(*batch));
    }
    admit_cv_.wait_for(lock, tick);
  }
}

void Engine::lane_loop(int lane) {
  Lane& self = lanes_[lane];
  const Clock clock = [this] { return now_us(); };
  std::unique_lock lock(mu_);
  while (true) {
    lane_cv_.wait(lock, [&] { return stopping_ || !self.queue.empty(); });
    // Queued batches are abandoned once stopping; only a timed-out drain
    // can leave any.
    if (stopping_) {
      return;
    }
    Batch batch = std::move(self.queue.front());
    self.queue.pop_front();
    lock.unlock();
    std::vector<PhaseSpan> spans;
    std::vector<RequestResult> results = self.runner->run(batch, clock, &spans);
    lock.lock();
    selector_.complete(lane, batch.total_tokens);
    finished_ += results.size();
    for (auto& r : results) {
      report_.results.push_back(std::move(r));
    }
    report_.spans.insert(report_.spans.end(), spans.begin(), spans.end());
    done_cv_.notify_all();
  }
}

EngineReport Engine::drain(std::chrono::milliseconds timeout) {
  {
    std::unique_lock lock(mu_);
    require(!drained_, ErrorCode::kState, "engine already drained");
    const bool done = done_cv_.wait_for(
        lock, timeout, [&] { return finished_ == admitted_; });
    report_.partial = !done;
  }
  stop();
  std::lock_guard lock(mu_);
  drained_ = true;
  for (const Lane& lane : lanes_) {
    report_.device_handoffs += lane.runner->device_handoffs();
    report_.planner_calls += lane.runner->planner_calls();
  }
  report_.sort_results();
  return std::move(report_);
}

void Engine::stop() {
  {
    std::lock_guard lock(mu_);
    if (stopping_) {
      return;
    }
    stopping_ = true;
  }
  admit_cv_.notify_all();
  lane_cv_.notify_all();
  if (admission_.joinable()) {
    admission_.join();
  }
  for (Lane& lane : lanes_) {
    if (lane.thread.joinable()) {
      lane.thread.join();
    }
  }
}

}  // namespace grserve
