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

#include "model/transformer.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "common/errors.h"
#include "model/ops.h"

namespace grserve {

Transformer::Transformer(std::shared_ptr<const Weights> weights)
    : weights_(std::move(weights)),
      attention_(AttentionConfig::make(weights_->config.heads,
                                       weights_->config.head_dim,
                                       weights_->config.tile_size)) {}

void Transformer::set_attention_lanes(const PartitionSetting& lanes,
                                      ThreadPool* pool) {
  lanes_ = lanes;
  pool_ = pool;
}

void Transformer::check_tokens(std::span<const int> tokens) const {
  const int vocab = config().vocab_size;
  for (int t : tokens) {
    require(t >= 0 && t < vocab, ErrorCode::kInput,
            "token id " + std::to_string(t) + " outside vocabulary of " +
                std::to_string(vocab));
  }
}

void Transformer::embed(std::span<const int> tokens, float* x) const {
  const std::size_t hidden = config().hidden();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::copy_n(weights_->embedding.data() + tokens[i] * hidden, hidden,
                x + i * hidden);
  }
}

void Transformer::mlp_block(const LayerWeights& lw, std::size_t rows,
                            float* x) {
  const std::size_t hidden = config().hidden();
  const std::size_t ffn = config().ffn();
  h_.resize(rows * hidden);
  ffn_.resize(rows * ffn);
  ops::rms_norm(x, rows, hidden, lw.mlp_norm.data(), h_.data());
  ops::matmul(h_.data(), rows, hidden, lw.w_up.data(), ffn, ffn_.data());
  for (auto& f : ffn_) {
    f = ops::silu(f);
  }
  ops::matmul_add(ffn_.data(), rows, ffn, lw.w_down.data(), hidden, x);
}

void Transformer::project_logits(const float* x, std::size_t rows,
                                 float* logits) {
  const std::size_t hidden = config().hidden();
  h_.resize(rows * hidden);
  ops::rms_norm(x, rows, hidden, weights_->final_norm.data(), h_.data());
  ops::matmul(h_.data(), rows, hidden, weights_->lm_head.data(),
              config().vocab_size, logits);
}

void Transformer::prefill_forward(std::span<const int> prompt,
                                  SharedKvCache& shared,
                                  std::span<float> logits) {
  begin_prefill(prompt, shared);
  for (int l = 0; l < config().layers; ++l) {
    run_layer(l);
  }
  finish(logits);
}

std::vector<float> Transformer::prefill_forward(std::span<const int> prompt,
                                                SharedKvCache& shared) {
  std::vector<float> logits(config().vocab_size);
  prefill_forward(prompt, shared, logits);
  return logits;
}

void Transformer::decode_forward(std::span<const int> tips,
                                 const SharedKvCache& shared,
                                 UnsharedKvCache& unshared, int step,
                                 std::span<float> logits,
                                 AttentionCounters* counters) {
  begin_decode(tips, shared, unshared, step, counters);
  for (int l = 0; l < config().layers; ++l) {
    run_layer(l);
  }
  finish(logits);
}

void Transformer::begin_prefill(std::span<const int> prompt,
                                SharedKvCache& shared) {
  require(pending_ == Pending::kNone, ErrorCode::kState,
          "a forward pass is already in progress");
  require(!prompt.empty(), ErrorCode::kInput, "prompt must be non-empty");
  require(shared.empty(), ErrorCode::kState,
          "prefill needs an empty shared cache");
  check_tokens(prompt);
  shared.begin(prompt.size());
  const std::size_t hidden = config().hidden();
  x_.resize(prompt.size() * hidden);
  embed(prompt, x_.data());
  pending_ = Pending::kPrefill;
  next_layer_ = 0;
  rows_ = prompt.size();
  prompt_len_ = prompt.size();
  prefill_shared_ = &shared;
}

void Transformer::begin_decode(std::span<const int> tips,
                               const SharedKvCache& shared,
                               UnsharedKvCache& unshared, int step,
                               AttentionCounters* counters) {
  require(pending_ == Pending::kNone, ErrorCode::kState,
          "a forward pass is already in progress");
  require(step >= 0 && step < unshared.decode_steps(), ErrorCode::kSequencing,
          "decode step " + std::to_string(step) + " out of range");
  require(step == unshared.filled_steps() && !unshared.step_open(),
          ErrorCode::kSequencing,
          "decode step " + std::to_string(step) + " but cache holds " +
              std::to_string(unshared.filled_steps()) + " steps");
  require(shared.sealed(), ErrorCode::kState, "prefill has not completed");
  require(!tips.empty() &&
              tips.size() <= static_cast<std::size_t>(unshared.beam_width()),
          ErrorCode::kShape, "beam count out of range");
  check_tokens(tips);
  const std::size_t hidden = config().hidden();
  x_.resize(tips.size() * hidden);
  embed(tips, x_.data());
  pending_ = Pending::kDecode;
  next_layer_ = 0;
  rows_ = tips.size();
  decode_shared_ = &shared;
  unshared_ = &unshared;
  step_ = step;
  counters_ = counters;
}

void Transformer::run_layer(int layer) {
  require(pending_ != Pending::kNone && layer == next_layer_ &&
              layer < config().layers,
          ErrorCode::kSequencing, "layers must run in order after begin");
  if (pending_ == Pending::kPrefill) {
    prefill_layer(layer);
  } else {
    decode_layer(layer);
  }
  ++next_layer_;
}

void Transformer::finish(std::span<float> logits) {
  require(pending_ != Pending::kNone && next_layer_ == config().layers,
          ErrorCode::kSequencing, "finish before every layer ran");
  const std::size_t rows = pending_ == Pending::kPrefill ? 1 : rows_;
  require(logits.size() == rows * config().vocab_size, ErrorCode::kShape,
          "logits buffer must be [rows][vocab]");
  if (pending_ == Pending::kPrefill) {
    prefill_shared_->seal();
  }
  pending_ = Pending::kNone;
  project_logits(x_.data() + (rows_ - rows) * config().hidden(), rows,
                 logits.data());
}

void Transformer::prefill_layer(int l) {
  const auto& cfg = config();
  const std::size_t n = prompt_len_;
  const std::size_t hidden = cfg.hidden();
  const int heads = cfg.heads;
  const int dim = cfg.head_dim;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dim));
  const auto& lw = weights_->layers[l];
  const bool last = l + 1 == cfg.layers;

  h_.resize(n * hidden);
  k_.resize(n * hidden);
  v_.resize(n * hidden);
  ops::rms_norm(x_.data(), n, hidden, lw.attn_norm.data(), h_.data());
  ops::matmul(h_.data(), n, hidden, lw.wk.data(), hidden, k_.data());
  ops::matmul(h_.data(), n, hidden, lw.wv.data(), hidden, v_.data());
  for (std::size_t p = 0; p < n; ++p) {
    ops::apply_rotary(k_.data() + p * hidden, heads, dim, p);
  }
  prefill_shared_->write_layer(l, k_, v_);

  // The last layer only needs the final position's output.
  const std::size_t first_query = last ? n - 1 : 0;
  const std::size_t queries = n - first_query;
  q_.resize(queries * hidden);
  ops::matmul(h_.data() + first_query * hidden, queries, hidden, lw.wq.data(),
              hidden, q_.data());
  attn_.assign(queries * hidden, 0.0f);
  scores_.resize(n);
  for (std::size_t qi = 0; qi < queries; ++qi) {
    const std::size_t pos = first_query + qi;
    float* q = q_.data() + qi * hidden;
    ops::apply_rotary(q, heads, dim, pos);
    for (int h = 0; h < heads; ++h) {
      const float* qh = q + h * dim;
      float max_score = -std::numeric_limits<float>::infinity();
      for (std::size_t t = 0; t <= pos; ++t) {
        const float* kt = k_.data() + t * hidden + h * dim;
        float dot = 0.0f;
        for (int d = 0; d < dim; ++d) {
          dot += qh[d] * kt[d];
        }
        scores_[t] = dot * scale;
        max_score = std::max(max_score, scores_[t]);
      }
      float sum = 0.0f;
      float* out = attn_.data() + qi * hidden + h * dim;
      for (std::size_t t = 0; t <= pos; ++t) {
        const float w = std::exp(scores_[t] - max_score);
        sum += w;
        const float* vt = v_.data() + t * hidden + h * dim;
        for (int d = 0; d < dim; ++d) {
          out[d] += w * vt[d];
        }
      }
      const float inv = 1.0f / sum;
      for (int d = 0; d < dim; ++d) {
        out[d] *= inv;
      }
    }
  }
  if (last && rows_ > 1) {
    std::copy_n(x_.data() + (n - 1) * hidden, hidden, x_.data());
    rows_ = 1;
  }
  ops::matmul_add(attn_.data(), rows_, hidden, lw.wo.data(), hidden,
                  x_.data());
  mlp_block(lw, rows_, x_.data());
}

void Transformer::decode_layer(int l) {
  const auto& cfg = config();
  const std::size_t n = rows_;
  const std::size_t hidden = cfg.hidden();
  const std::size_t position = decode_shared_->prompt_len() + step_;
  const auto& lw = weights_->layers[l];
  h_.resize(n * hidden);
  q_.resize(n * hidden);
  k_.resize(n * hidden);
  v_.resize(n * hidden);
  attn_.resize(n * hidden);
  ops::rms_norm(x_.data(), n, hidden, lw.attn_norm.data(), h_.data());
  ops::matmul(h_.data(), n, hidden, lw.wq.data(), hidden, q_.data());
  ops::matmul(h_.data(), n, hidden, lw.wk.data(), hidden, k_.data());
  ops::matmul(h_.data(), n, hidden, lw.wv.data(), hidden, v_.data());
  for (std::size_t b = 0; b < n; ++b) {
    ops::apply_rotary(q_.data() + b * hidden, cfg.heads, cfg.head_dim,
                      position);
    ops::apply_rotary(k_.data() + b * hidden, cfg.heads, cfg.head_dim,
                      position);
  }
  unshared_->append_layer(l, step_, k_, v_);
  const UnsharedKvLayer generated = unshared_->layer(l);
  attention_.run(q_, decode_shared_->layer(l), &generated, step_, attn_,
                 lanes_, pool_, counters_);
  ops::matmul_add(attn_.data(), n, hidden, lw.wo.data(), hidden, x_.data());
  mlp_block(lw, n, x_.data());
}

std::size_t Transformer::paged_token_width() const {
  return static_cast<std::size_t>(config().layers) * 2 * config().hidden();
}

void Transformer::load_paged_prompt(const SharedKvCache& shared,
                                    PagedKvCache& paged,
                                    int beam_width) const {
  const std::size_t width = paged_token_width();
  require(paged.token_width() == width, ErrorCode::kShape,
          "paged cache token width does not match the model");
  const std::size_t hidden = config().hidden();
  const std::size_t n = shared.prompt_len();
  std::vector<float> payload(n * width);
  for (int l = 0; l < config().layers; ++l) {
    const auto layer = shared.layer(l);
    for (std::size_t t = 0; t < n; ++t) {
      float* dst = payload.data() + t * width + l * 2 * hidden;
      std::copy_n(layer.keys.data() + t * hidden, hidden, dst);
      std::copy_n(layer.values.data() + t * hidden, hidden, dst + hidden);
    }
  }
  paged.init_prompt(n, beam_width, payload);
}

void Transformer::decode_forward_paged(std::span<const int> tips,
                                       PagedKvCache& paged,
                                       std::span<float> logits,
                                       AttentionCounters* counters) {
  const auto& cfg = config();
  const std::size_t n = tips.size();
  const std::size_t hidden = cfg.hidden();
  require(n >= 1 && static_cast<int>(n) == paged.beam_count(),
          ErrorCode::kShape, "one tip per paged beam required");
  require(paged.token_width() == paged_token_width(), ErrorCode::kShape,
          "paged cache token width does not match the model");
  require(logits.size() == n * cfg.vocab_size, ErrorCode::kShape,
          "logits buffer must be [beams][vocab]");
  check_tokens(tips);
  const std::size_t len = paged.sequence_length(0);
  for (std::size_t b = 1; b < n; ++b) {
    require(paged.sequence_length(static_cast<int>(b)) == len,
            ErrorCode::kState, "paged beams have diverging lengths");
  }
  const std::size_t position = len - 1;
  const AttentionConfig acfg = attention_.config();

  x_.resize(n * hidden);
  embed(tips, x_.data());
  PartialAttention partial;
  for (int l = 0; l < cfg.layers; ++l) {
    const auto& lw = weights_->layers[l];
    h_.resize(n * hidden);
    q_.resize(n * hidden);
    k_.resize(n * hidden);
    v_.resize(n * hidden);
    attn_.resize(n * hidden);
    ops::rms_norm(x_.data(), n, hidden, lw.attn_norm.data(), h_.data());
    ops::matmul(h_.data(), n, hidden, lw.wq.data(), hidden, q_.data());
    ops::matmul(h_.data(), n, hidden, lw.wk.data(), hidden, k_.data());
    ops::matmul(h_.data(), n, hidden, lw.wv.data(), hidden, v_.data());
    const std::size_t offset = static_cast<std::size_t>(l) * 2 * hidden;
    for (std::size_t b = 0; b < n; ++b) {
      ops::apply_rotary(q_.data() + b * hidden, cfg.heads, cfg.head_dim,
                        position);
      ops::apply_rotary(k_.data() + b * hidden, cfg.heads, cfg.head_dim,
                        position);
      auto slot = paged.slot(static_cast<int>(b), position);
      std::copy_n(k_.data() + b * hidden, hidden, slot.begin() + offset);
      std::copy_n(v_.data() + b * hidden, hidden,
                  slot.begin() + offset + hidden);
    }
    gather_k_.resize(len * hidden);
    gather_v_.resize(len * hidden);
    for (std::size_t b = 0; b < n; ++b) {
      paged.gather_range(static_cast<int>(b), offset, hidden, gather_k_);
      paged.gather_range(static_cast<int>(b), offset + hidden, hidden,
                         gather_v_);
      const SharedKvLayer sequence{gather_k_, gather_v_, len};
      std::span<const float> query(q_.data() + b * hidden, hidden);
      attend_shared(query, sequence, acfg, partial, counters);
      finalize_partial(partial,
                       std::span<float>(attn_.data() + b * hidden, hidden));
    }
    ops::matmul_add(attn_.data(), n, hidden, lw.wo.data(), hidden, x_.data());
    mlp_block(lw, n, x_.data());
  }
  project_logits(x_.data(), n, logits.data());
}

}  // namespace grserve
