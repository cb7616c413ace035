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

#include "scheduler/batch_runner.h"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <string>

#include "common/errors.h"
#include "kvcache/reorder.h"

namespace grserve {

struct BatchRunner::Slot {
  const Request* request = nullptr;
  RequestParams params;
  SharedKvCache shared;
  std::unique_ptr<UnsharedKvCache> unshared;
  std::unique_ptr<PagedKvCache> paged;
  std::unique_ptr<BeamSearch> search;
  std::vector<float> logits;
  std::vector<int> tips;
  // Source beams of every level, for the paged accounting replay.
  std::vector<std::vector<int>> sources;
  bool failed = false;
  double last_end_us = 0.0;
  std::string error;
  // Written by the device thread, merged once the phase has joined.
  bool device_failed = false;
  std::string device_error;

  explicit Slot(const KvDims& dims) : shared(dims) {}

  void fail(const std::string& message) {
    if (!failed) {
      failed = true;
      error = message;
    }
  }
};

namespace {

void spin_for_us(double us) {
  if (us <= 0.0) {
    return;
  }
  const auto until = std::chrono::steady_clock::now() +
                     std::chrono::duration<double, std::micro>(us);
  while (std::chrono::steady_clock::now() < until) {
  }
}

}  // namespace

void validate_request(const Request& request, const ModelConfig& model,
                      const ItemVocabulary* vocab) {
  require(!request.prompt.empty(), ErrorCode::kInput,
          "request " + std::to_string(request.id) + " has an empty prompt");
  for (int t : request.prompt) {
    require(t >= 0 && t < model.vocab_size, ErrorCode::kInput,
            "request " + std::to_string(request.id) + " has token " +
                std::to_string(t) + " outside the vocabulary");
  }
  const RequestParams& p = request.params;
  BeamConfig beam{p.beam_width, p.top_k, p.decode_steps, p.masking, false};
  try {
    beam.validate(model.vocab_size);
  } catch (const Error& e) {
    fail(ErrorCode::kInput, e.what());
  }
  if (p.masking) {
    require(vocab != nullptr && vocab->depth() == p.decode_steps &&
                vocab->vocab_size() == model.vocab_size,
            ErrorCode::kInput,
            "masking needs a vocabulary of depth nd over the model's tokens");
  }
}

BatchRunner::BatchRunner(std::shared_ptr<const Weights> weights,
                         std::shared_ptr<const ItemVocabulary> vocab,
                         const EngineConfig& config, int lane)
    : weights_(std::move(weights)),
      vocab_(std::move(vocab)),
      config_(config),
      lane_(lane),
      model_(weights_),
      device_(1) {
  config_.validate();
  if (config_.attention_lanes > 0) {
    attention_pool_ = std::make_unique<ThreadPool>(config_.attention_lanes);
  }
  if (!config_.planner_path.empty()) {
    std::ifstream in(config_.planner_path);
    require(in.good(), ErrorCode::kIo,
            "cannot open planner '" + config_.planner_path + "'");
    try {
      planner_ = PlannerModel::from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kConfig, "malformed planner '" + config_.planner_path +
                                   "': " + e.what());
    }
  }
}

BatchRunner::~BatchRunner() = default;

BatchRunner::Slot& BatchRunner::slot_for(std::size_t index,
                                         const Request& request) {
  const ModelConfig& mc = weights_->config;
  if (slots_.size() <= index) {
    slots_.resize(index + 1);
  }
  auto& ptr = slots_[index];
  const RequestParams& p = request.params;
  if (!ptr) {
    ptr = std::make_unique<Slot>(mc.kv_dims());
  }
  Slot& s = *ptr;
  if (!s.search || !(s.params == p)) {
    BeamConfig beam{p.beam_width, p.top_k, p.decode_steps, p.masking,
                    false};
    s.search = std::make_unique<BeamSearch>(beam, vocab_.get(),
                                            mc.vocab_size);
    s.unshared = std::make_unique<UnsharedKvCache>(p.beam_width,
                                                   p.decode_steps,
                                                   mc.kv_dims());
    s.logits.assign(static_cast<std::size_t>(p.beam_width) * mc.vocab_size,
                    0.0f);
    s.params = p;
  }
  const std::size_t width =
      config_.kv_mode == KvMode::kPaged ? model_.paged_token_width() : 0;
  const std::size_t blocks =
      paged_blocks_needed(request.tokens(), p.beam_width, p.decode_steps,
                          config_.paged_block_size);
  if (!s.paged || s.paged->config().num_blocks < blocks ||
      s.paged->config().token_width != width) {
    PagedKvConfig pc;
    pc.block_size = config_.paged_block_size;
    pc.num_blocks = blocks;
    pc.token_width = width;
    s.paged = std::make_unique<PagedKvCache>(pc);
  }
  s.request = &request;
  s.shared.clear();
  s.unshared->reset();
  s.paged->release_all();
  s.paged->reset_stats();
  s.search->reset();
  s.sources.clear();
  s.failed = false;
  s.last_end_us = 0.0;
  s.error.clear();
  s.device_failed = false;
  s.device_error.clear();
  return s;
}

std::future<void> BatchRunner::handoff(std::function<void()> work) {
  ++handoffs_;
  const double overhead = config_.launch_overhead_us;
  return device_.submit([overhead, work = std::move(work)] {
    spin_for_us(overhead);
    work();
  });
}

void BatchRunner::forward(Slot& s, bool prefill, int step, int layer) {
  if (s.device_failed) {
    return;
  }
  const bool paged = config_.kv_mode == KvMode::kPaged;
  const int layers = weights_->config.layers;
  const std::size_t vocab = weights_->config.vocab_size;
  try {
    if (!prefill && paged) {
      // The paged baseline decodes a request in one pass.
      if (layer <= 0) {
        model_.decode_forward_paged(
            s.tips, *s.paged,
            std::span<float>(s.logits.data(), s.tips.size() * vocab));
      }
      return;
    }
    const int first = layer < 0 ? 0 : layer;
    const int last = layer < 0 ? layers - 1 : layer;
    if (first == 0) {
      if (prefill) {
        model_.begin_prefill(s.request->prompt, s.shared);
      } else {
        if (attention_pool_) {
          const PlannerModel* planner = planner_ ? &*planner_ : nullptr;
          model_.set_attention_lanes(
              plan_partition(s.request->tokens(),
                             static_cast<std::size_t>(step) + 1,
                             config_.attention_lanes, planner,
                             s.params.beam_width),
              attention_pool_.get());
          planner_calls_ += planner != nullptr;
        }
        model_.begin_decode(s.tips, s.shared, *s.unshared, step);
      }
    }
    for (int l = first; l <= last; ++l) {
      model_.run_layer(l);
    }
    if (last == layers - 1) {
      const std::size_t rows = prefill ? 1 : s.tips.size();
      model_.finish(std::span<float>(s.logits.data(), rows * vocab));
      if (prefill && paged) {
        model_.load_paged_prompt(s.shared, *s.paged, s.params.beam_width);
      }
    }
  } catch (const std::exception& e) {
    model_.abort();
    s.device_failed = true;
    s.device_error = e.what();
  }
}

void BatchRunner::device_phase(std::vector<Slot*>& live, bool prefill,
                               int step,
                               const std::function<void()>& host_work,
                               const Clock& clock, double span[2],
                               double host_span[2]) {
  span[0] = clock();
  std::future<void> done;
  const bool paged_decode = !prefill && config_.kv_mode == KvMode::kPaged;
  if (config_.graph_dispatch) {
    done = handoff([this, &live, prefill, step] {
      for (Slot* s : live) {
        forward(*s, prefill, step, -1);
      }
    });
  } else {
    const int handoffs = paged_decode ? 1 : weights_->config.layers;
    for (Slot* s : live) {
      for (int l = 0; l < handoffs; ++l) {
        done = handoff([this, s, prefill, step, l] {
          forward(*s, prefill, step, l);
        });
      }
    }
  }
  if (config_.overlap) {
    host_span[0] = clock();
    host_work();
    host_span[1] = clock();
    done.get();
    span[1] = clock();
  } else {
    done.get();
    span[1] = clock();
    host_span[0] = clock();
    host_work();
    host_span[1] = clock();
  }
  // Handoffs run in submission order, so the last future covers them all.
  for (Slot* s : live) {
    if (s->device_failed) {
      s->fail(s->device_error);
    }
  }
}

std::vector<RequestResult> BatchRunner::run(const Batch& batch,
                                            const Clock& clock,
                                            std::vector<PhaseSpan>* spans) {
  const double start = clock();
  std::vector<Slot*> slots;
  std::vector<RequestResult> results(batch.requests.size());
  for (std::size_t i = 0; i < batch.requests.size(); ++i) {
    const Request& r = batch.requests[i];
    RequestResult& res = results[i];
    res.id = r.id;
    res.batch_id = batch.id;
    res.lane = lane_;
    res.params = r.params;
    res.prompt_len = r.tokens();
    res.arrival_us = r.arrival_us;
    slots.push_back(&slot_for(i, r));
  }
  auto emit = [&](Slot* s, Phase phase, int step, double a, double b) {
    if (spans != nullptr) {
      spans->push_back(PhaseSpan{s->request->id, phase, step, a, b, lane_});
    }
    s->last_end_us = std::max(s->last_end_us, b);
  };
  for (Slot* s : slots) {
    emit(s, Phase::kQueue, -1, s->request->arrival_us, batch.formed_us);
    emit(s, Phase::kDispatch, -1, batch.formed_us, start);
  }
  auto live_slots = [&] {
    std::vector<Slot*> live;
    for (Slot* s : slots) {
      if (!s->failed) {
        live.push_back(s);
      }
    }
    return live;
  };
  auto prepare_masks = [&](std::vector<Slot*>& live) {
    for (Slot* s : live) {
      try {
        s->search->prepare_masks();
      } catch (const std::exception& e) {
        s->fail(e.what());
      }
    }
  };

  double device_span[2];
  double host_span[2];
  std::vector<Slot*> live = live_slots();
  device_phase(live, true, -1, [&] { prepare_masks(live); }, clock,
               device_span, host_span);
  for (Slot* s : live) {
    emit(s, Phase::kPrefill, -1, device_span[0], device_span[1]);
    if (s->params.masking) {
      emit(s, Phase::kMask, 0, host_span[0], host_span[1]);
    }
  }

  const int steps = slots.empty() ? 0 : slots.front()->params.decode_steps;
  const std::size_t vocab = weights_->config.vocab_size;
  for (int level = 0; level < steps; ++level) {
    live = live_slots();
    const double beam_start = clock();
    for (Slot* s : live) {
      try {
        const std::size_t rows =
            level == 0 ? 1 : static_cast<std::size_t>(s->search->live());
        const ReorderPlan& plan = s->search->select(
            std::span<float>(s->logits.data(), rows * vocab));
        s->sources.emplace_back(plan.src.begin(), plan.src.end());
        if (config_.kv_mode == KvMode::kPaged) {
          s->paged->fork(s->sources.back());
          s->paged->append_slots();
        } else {
          apply_reorder_in_place(*s->unshared, plan);
        }
        const auto tips = s->search->tips();
        s->tips.assign(tips.begin(), tips.end());
      } catch (const std::exception& e) {
        s->fail(e.what());
      }
    }
    const double beam_end = clock();
    for (Slot* s : live) {
      emit(s, Phase::kBeam, level, beam_start, beam_end);
    }
    live = live_slots();
    const bool next_masks = level + 1 < steps;
    device_phase(
        live, false, level,
        [&] {
          if (next_masks) {
            prepare_masks(live);
          }
        },
        clock, device_span, host_span);
    for (Slot* s : live) {
      emit(s, Phase::kDecode, level, device_span[0], device_span[1]);
      if (next_masks && s->params.masking) {
        emit(s, Phase::kMask, level + 1, host_span[0], host_span[1]);
      }
    }
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    Slot& s = *slots[i];
    RequestResult& res = results[i];
    res.completion_us = s.last_end_us;
    res.failed = s.failed;
    res.error = s.error;
    res.selection = s.search->stats();
    if (s.failed) {
      continue;
    }
    res.items = s.search->final_items();
    res.live_beams = s.search->live();
    if (vocab_) {
      for (const auto& item : res.items) {
        if (!vocab_->contains(item.tokens)) {
          ++res.invalid_items;
        }
      }
    }
    if (config_.kv_mode == KvMode::kSeparated) {
      // Replay the beam forks on an accounting-only paged cache so both
      // layouts are reported for every run.
      s.paged->init_prompt(s.request->tokens(), s.params.beam_width);
      for (const auto& src : s.sources) {
        s.paged->fork(src);
        s.paged->append_slots();
      }
    }
    res.memory = memory_report(&s.shared, s.unshared.get(), s.paged.get());
    if (config_.kv_mode == KvMode::kPaged) {
      // The unshared cache was never used in this mode.
      res.memory.unshared_token_slots = 0;
    }
  }
  return results;
}

}  // namespace grserve
