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

#include "scheduler/virtual_engine.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "common/errors.h"
#include "scheduler/batch_former.h"
#include "scheduler/batch_runner.h"

namespace grserve {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct PhaseCosts {
  double prefill = 0.0;
  std::vector<double> select;
  std::vector<double> decode;
  std::vector<double> mask;  // mask[l]: preparation for level l
};

}  // namespace

void to_json(nlohmann::json& j, const CostModel& c) {
  j = nlohmann::json{
      {"prefill_fixed_us", c.prefill_fixed_us},
      {"prefill_per_token_us", c.prefill_per_token_us},
      {"decode_fixed_us", c.decode_fixed_us},
      {"decode_per_beam_us", c.decode_per_beam_us},
      {"attend_per_prompt_token_us", c.attend_per_prompt_token_us},
      {"attend_per_generated_token_us", c.attend_per_generated_token_us},
      {"select_per_candidate_us", c.select_per_candidate_us},
      {"mask_per_beam_us", c.mask_per_beam_us}};
}

void from_json(const nlohmann::json& j, CostModel& c) {
  require(j.is_object(), ErrorCode::kConfig, "cost model must be an object");
  for (const auto& [key, value] : j.items()) {
    double* field = key == "prefill_fixed_us"       ? &c.prefill_fixed_us
                    : key == "prefill_per_token_us" ? &c.prefill_per_token_us
                    : key == "decode_fixed_us"      ? &c.decode_fixed_us
                    : key == "decode_per_beam_us"   ? &c.decode_per_beam_us
                    : key == "attend_per_prompt_token_us"
                        ? &c.attend_per_prompt_token_us
                    : key == "attend_per_generated_token_us"
                        ? &c.attend_per_generated_token_us
                    : key == "select_per_candidate_us"
                        ? &c.select_per_candidate_us
                    : key == "mask_per_beam_us" ? &c.mask_per_beam_us
                                                : nullptr;
    require(field != nullptr, ErrorCode::kConfig,
            "unknown cost model key '" + key + "'");
    *field = value.get<double>();
  }
}

VirtualEngine::VirtualEngine(const EngineConfig& config,
                             const CostModel& costs,
                             std::shared_ptr<const Weights> weights,
                             std::shared_ptr<const ItemVocabulary> vocab,
                             int layers_for_costs)
    : config_(config),
      costs_(costs),
      weights_(std::move(weights)),
      vocab_(std::move(vocab)),
      layers_(weights_ ? weights_->config.layers : layers_for_costs) {
  config_.validate();
}

EngineReport VirtualEngine::run(std::vector<Request> requests) {
  std::stable_sort(requests.begin(), requests.end(),
                   [](const Request& a, const Request& b) {
                     return a.arrival_us < b.arrival_us;
                   });
  for (const Request& r : requests) {
    require(r.arrival_us >= 0.0, ErrorCode::kInput,
            "virtual-time requests need arrival times");
    if (weights_) {
      validate_request(r, weights_->config, vocab_.get());
    }
  }
  const int vocab_size = weights_ ? weights_->config.vocab_size : 256;
  const bool paged = config_.kv_mode == KvMode::kPaged;
  const double tick = config_.tick_us();
  const double launch = config_.launch_overhead_us;

  auto phase_costs = [&](const Batch& batch) {
    PhaseCosts pc;
    const RequestParams& p = batch.requests.front().params;
    const double n = static_cast<double>(batch.requests.size());
    const double launches_per_phase =
        config_.graph_dispatch ? 1.0 : n * layers_;
    pc.prefill = launches_per_phase * launch;
    for (const Request& r : batch.requests) {
      pc.prefill += costs_.prefill_fixed_us +
                    costs_.prefill_per_token_us * static_cast<double>(r.tokens());
    }
    for (int level = 0; level < p.decode_steps; ++level) {
      const double candidates =
          level == 0 ? vocab_size
                     : static_cast<double>(p.beam_width) * p.top_k;
      pc.select.push_back(n * costs_.select_per_candidate_us * candidates);
      double decode = paged && !config_.graph_dispatch ? n * launch
                                                       : launches_per_phase *
                                                             launch;
      for (const Request& r : batch.requests) {
        const double bw = p.beam_width;
        const double prompt = static_cast<double>(r.tokens());
        const double shared_reads = paged ? bw * prompt : prompt;
        decode += costs_.decode_fixed_us + costs_.decode_per_beam_us * bw +
                  costs_.attend_per_prompt_token_us * shared_reads +
                  costs_.attend_per_generated_token_us * bw * (level + 1);
      }
      pc.decode.push_back(decode);
      pc.mask.push_back(p.masking ? n * costs_.mask_per_beam_us *
                                        (level == 0 ? 1.0 : p.beam_width)
                                  : 0.0);
    }
    return pc;
  };

  std::vector<std::unique_ptr<BatchRunner>> runners;
  if (weights_) {
    for (int l = 0; l < config_.num_lanes; ++l) {
      runners.push_back(
          std::make_unique<BatchRunner>(weights_, vocab_, config_, l));
    }
  }

  EngineReport report;
  BatchFormer former(config_.max_tokens_per_batch, config_.wait_quota_us());
  LaneSelector selector(config_.num_lanes);
  std::vector<double> lane_free(config_.num_lanes, 0.0);
  using Completion = std::tuple<double, int, std::size_t>;
  std::priority_queue<Completion, std::vector<Completion>,
                      std::greater<Completion>>
      completions;
  auto on_grid = [tick](double t) { return std::ceil(t / tick) * tick; };

  std::size_t next = 0;
  double now = requests.empty() ? 0.0 : on_grid(requests.front().arrival_us);
  while (next < requests.size() || !former.empty()) {
    while (!completions.empty() && std::get<0>(completions.top()) <= now) {
      const auto [end, lane, tokens] = completions.top();
      completions.pop();
      selector.complete(lane, tokens);
    }
    while (next < requests.size() && requests[next].arrival_us <= now) {
      if (former.size() >= config_.queue_capacity) {
        report.rejected.push_back(requests[next].id);
      } else {
        former.push(std::move(requests[next]));
      }
      ++next;
    }
    while (auto formed = former.form(now)) {
      Batch& batch = *formed;
      const int lane = selector.pick();
      selector.assign(lane, batch.total_tokens);
      const double start = std::max(now, lane_free[lane]);
      const PhaseCosts pc = phase_costs(batch);
      std::vector<PhaseSpan> spans;
      auto emit = [&](Phase phase, int step, double a, double b) {
        for (const Request& r : batch.requests) {
          spans.push_back(PhaseSpan{r.id, phase, step, a, b, lane});
        }
      };
      const bool masking = batch.requests.front().params.masking;
      for (const Request& r : batch.requests) {
        spans.push_back(
            PhaseSpan{r.id, Phase::kQueue, -1, r.arrival_us, now, lane});
        spans.push_back(PhaseSpan{r.id, Phase::kDispatch, -1, now, start, lane});
      }
      // Device work and the host mask work either overlap or serialize.
      auto device_with_masks = [&](Phase phase, int step, double at,
                                   double device, int mask_level) {
        const double mask = mask_level >= 0 ? pc.mask[mask_level] : 0.0;
        emit(phase, step, at, at + device);
        if (masking && mask_level >= 0) {
          const double mask_start = config_.overlap ? at : at + device;
          emit(Phase::kMask, mask_level, mask_start, mask_start + mask);
        }
        return at + (config_.overlap ? std::max(device, mask) : device + mask);
      };
      double cursor = device_with_masks(Phase::kPrefill, -1, start, pc.prefill, 0);
      const int steps = static_cast<int>(pc.decode.size());
      for (int level = 0; level < steps; ++level) {
        emit(Phase::kBeam, level, cursor, cursor + pc.select[level]);
        cursor += pc.select[level];
        cursor = device_with_masks(Phase::kDecode, level, cursor,
                                   pc.decode[level],
                                   level + 1 < steps ? level + 1 : -1);
      }
      const double end = cursor;
      lane_free[lane] = end;
      completions.emplace(end, lane, batch.total_tokens);

      std::vector<RequestResult> results;
      if (weights_) {
        results = runners[lane]->run(batch, [] { return 0.0; }, nullptr);
      } else {
        for (const Request& r : batch.requests) {
          RequestResult res;
          res.id = r.id;
          res.params = r.params;
          res.prompt_len = r.tokens();
          res.memory.shared_token_slots = r.tokens();
          res.memory.unshared_token_slots =
              static_cast<std::uint64_t>(r.params.beam_width) *
              r.params.decode_steps;
          results.push_back(std::move(res));
        }
      }
      for (std::size_t i = 0; i < results.size(); ++i) {
        results[i].batch_id = batch.id;
        results[i].lane = lane;
        results[i].arrival_us = batch.requests[i].arrival_us;
        results[i].completion_us = end;
        report.results.push_back(std::move(results[i]));
      }
      BatchRecord record;
      record.id = batch.id;
      record.lane = lane;
      record.total_tokens = batch.total_tokens;
      record.oversize = batch.oversize;
      record.head_arrival_us = batch.requests.front().arrival_us;
      record.formed_us = batch.formed_us;
      for (const Request& r : batch.requests) {
        record.request_ids.push_back(r.id);
      }
      report.batches.push_back(std::move(record));
      report.spans.insert(report.spans.end(), spans.begin(), spans.end());
    }

    double event = kInf;
    if (next < requests.size()) {
      event = std::min(event, requests[next].arrival_us);
    }
    event = std::min(event, former.head_deadline_us());
    if (!completions.empty() && !former.empty()) {
      event = std::min(event, std::get<0>(completions.top()));
    }
    if (event == kInf) {
      break;
    }
    now = std::max(now + tick, on_grid(event));
  }
  for (const auto& runner : runners) {
    report.device_handoffs += runner->device_handoffs();
    report.planner_calls += runner->planner_calls();
  }
  report.sort_results();
  return report;
}

}  // namespace grserve
