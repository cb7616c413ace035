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

#include <chrono>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "beam/vocabulary.h"
#include "model/weights.h"
#include "scheduler/batch_former.h"
#include "scheduler/batch_runner.h"
#include "scheduler/engine_config.h"
#include "scheduler/report.h"

namespace grserve {

// Wall-clock serving engine. One admission thread owns the batch former
// and wakes on every submit and at least once per tick; each lane thread
// runs one batch at a time through its own BatchRunner. Batches go to the
// lane with the fewest outstanding prompt tokens.
//
// The engine is single use: submit any number of requests, then drain().
class Engine {
 public:
  Engine(const EngineConfig& config, std::shared_ptr<const Weights> weights,
         std::shared_ptr<const ItemVocabulary> vocab);
  ~Engine();

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  // Microseconds since construction.
  double now_us() const;

  // Enqueues the request, stamping arrival now unless it carries a time.
  // Returns false, and records the id, when the queue is at capacity.
  // Invalid requests raise an input error; submitting after drain() is a
  // state error.
  bool submit(Request request);

  // Waits for every admitted request, stops the threads and returns the
  // report. On timeout the report holds what finished and is flagged
  // partial.
  EngineReport drain(std::chrono::milliseconds timeout =
                         std::chrono::minutes(10));

 private:
  struct Lane {
    std::unique_ptr<BatchRunner> runner;
    std::deque<Batch> queue;
    std::thread thread;
  };

  void admission_loop();
  void lane_loop(int lane);
  void dispatch(Batch batch);
  void stop();

  EngineConfig config_;
  std::shared_ptr<const Weights> weights_;
  std::shared_ptr<const ItemVocabulary> vocab_;
  std::chrono::steady_clock::time_point epoch_;

  std::mutex mu_;
  std::condition_variable admit_cv_;
  std::condition_variable lane_cv_;
  std::condition_variable done_cv_;
  BatchFormer former_;
  LaneSelector selector_;
  std::vector<Lane> lanes_;
  std::thread admission_;
  bool stopping_ = false;
  bool drained_ = false;
  std::size_t admitted_ = 0;
  std::size_t finished_ = 0;
  EngineReport report_;
};

}  // namespace grserve
