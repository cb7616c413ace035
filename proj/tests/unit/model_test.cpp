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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <vector>

#include "common/errors.h"
#include "common/rng.h"
#include "kvcache/paged_kv_cache.h"
#include "kvcache/reorder.h"
#include "model/ops.h"
#include "model/transformer.h"
#include "model/weights.h"
#include "validate/attention_cases.h"
#include "validate/model_reference.h"

using namespace grserve;
using validate::max_relative_error;

namespace {

// Frozen from the first run of init_weights with the default config.
constexpr std::uint64_t kSeed42Checksum = 10620524011186123039ull;

std::shared_ptr<const Weights> make_weights(ModelConfig cfg = {}) {
  return std::make_shared<const Weights>(init_weights(cfg));
}

std::vector<int> random_tokens(Rng& rng, std::size_t n, int vocab) {
  std::vector<int> out(n);
  for (auto& t : out) {
    t = static_cast<int>(rng.below(vocab));
  }
  return out;
}

double relative_error(std::span<const float> got,
                      std::span<const double> want) {
  return max_relative_error(got, want);
}

// Runs prefill plus `steps` decode steps with random tips and random
// monotone reorders, checking every beam's logits against a from-scratch
// recompute over prompt + that beam's generated tokens.
double worst_recompute_error(int beam_width, int steps, std::size_t prompt_len,
                             std::uint64_t seed, int beams_checked) {
  auto weights = make_weights();
  const auto& cfg = weights->config;
  Transformer model(weights);
  Rng rng(seed);
  const auto prompt = random_tokens(rng, prompt_len, cfg.vocab_size);
  SharedKvCache shared(cfg.kv_dims());
  UnsharedKvCache unshared(beam_width, steps, cfg.kv_dims());
  model.prefill_forward(prompt, shared);

  std::vector<std::vector<int>> history(beam_width);
  std::vector<float> logits(beam_width * cfg.vocab_size);
  ReorderPlan plan(beam_width);
  double worst = 0.0;
  for (int step = 0; step < steps; ++step) {
    if (step > 0) {
      std::vector<int> src(beam_width);
      for (auto& s : src) {
        s = static_cast<int>(rng.below(beam_width));
      }
      plan_reorder(src, beam_width, plan);
      apply_reorder_in_place(unshared, plan);
      std::vector<std::vector<int>> next(beam_width);
      for (int b = 0; b < beam_width; ++b) {
        next[b] = history[plan.src[b]];
      }
      history = std::move(next);
    }
    const auto tips = random_tokens(rng, beam_width, cfg.vocab_size);
    for (int b = 0; b < beam_width; ++b) {
      history[b].push_back(tips[b]);
    }
    model.decode_forward(tips, shared, unshared, step, logits);
    for (int b = 0; b < beam_width; b += std::max(1, beam_width / beams_checked)) {
      std::vector<int> sequence = prompt;
      sequence.insert(sequence.end(), history[b].begin(), history[b].end());
      const auto want = validate::recompute_logits(*weights, sequence);
      const std::span<const float> got(logits.data() + b * cfg.vocab_size,
                                       cfg.vocab_size);
      worst = std::max(worst, relative_error(got, want));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("init_weights is deterministic and seed dependent") {
  ModelConfig cfg;
  const Weights a = init_weights(cfg);
  const Weights b = init_weights(cfg);
  CHECK(a.checksum() == b.checksum());
  CHECK(a.embedding == b.embedding);
  cfg.seed = 43;
  CHECK(init_weights(cfg).checksum() != a.checksum());
}

TEST_CASE("seed 42 weights match the frozen checksum") {
  CHECK(init_weights(ModelConfig{}).checksum() == kSeed42Checksum);
}

TEST_CASE("weights survive a save/load round trip") {
  ModelConfig cfg;
  cfg.layers = 1;
  cfg.vocab_size = 32;
  const Weights w = init_weights(cfg);
  const auto dir = std::filesystem::temp_directory_path() / "grserve_weights";
  std::filesystem::create_directories(dir);
  const std::string prefix = (dir / "toy").string();
  save_weights(w, prefix);
  const Weights r = load_weights(prefix);
  CHECK(r.config == cfg);
  CHECK(r.checksum() == w.checksum());
  CHECK_THROWS_AS(load_weights((dir / "missing").string()), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("model config validation") {
  ModelConfig cfg;
  cfg.head_dim = 15;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = ModelConfig{};
  cfg.layers = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  nlohmann::json j = ModelConfig{};
  j["bogus"] = 1;
  CHECK_THROWS_AS(j.get<ModelConfig>(), Error);
}

TEST_CASE("log_softmax") {
  SUBCASE("symmetric pair") {
    const std::vector<float> row{0.0f, 0.0f};
    const auto out = ops::log_softmax(row);
    CHECK(out[0] == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
    CHECK(out[1] == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("large logits do not overflow") {
    const std::vector<float> row{1000.0f, 0.0f};
    const auto out = ops::log_softmax(row);
    CHECK(std::isfinite(out[0]));
    CHECK(std::isfinite(out[1]));
    CHECK(std::abs(out[0]) < 1e-12);
    CHECK(out[1] == doctest::Approx(-1000.0));
  }
  SUBCASE("random rows normalize") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<float> row(256);
      for (auto& v : row) {
        v = rng.uniform_float(-30.0f, 30.0f);
      }
      double sum = 0.0;
      for (double lp : ops::log_softmax(row)) {
        sum += std::exp(lp);
      }
      CHECK(std::abs(sum - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("prefill fills the shared cache and returns one row") {
  auto weights = make_weights();
  Transformer model(weights);
  SharedKvCache shared(weights->config.kv_dims());
  const std::vector<int> prompt{7};
  const auto logits = model.prefill_forward(prompt, shared);
  CHECK(logits.size() == 256);
  CHECK(shared.sealed());
  CHECK(shared.token_slots() == 1);
  for (float v : logits) {
    CHECK(std::isfinite(v));
  }
}

TEST_CASE("prefill is deterministic and depends on the whole prompt") {
  auto weights = make_weights();
  Transformer model(weights);
  Rng rng(11);
  auto prompt = random_tokens(rng, 200, 256);
  SharedKvCache a(weights->config.kv_dims());
  SharedKvCache b(weights->config.kv_dims());
  const auto first = model.prefill_forward(prompt, a);
  const auto second = model.prefill_forward(prompt, b);
  CHECK(first == second);

  prompt[0] = (prompt[0] + 1) % 256;
  SharedKvCache c(weights->config.kv_dims());
  CHECK(model.prefill_forward(prompt, c) != first);
}

TEST_CASE("prefill matches the recompute oracle") {
  auto weights = make_weights();
  Transformer model(weights);
  Rng rng(12);
  for (std::size_t n : {1u, 5u, 64u, 300u}) {
    const auto prompt = random_tokens(rng, n, 256);
    SharedKvCache shared(weights->config.kv_dims());
    const auto got = model.prefill_forward(prompt, shared);
    const auto want = validate::recompute_logits(*weights, prompt);
    CHECK(relative_error(got, want) <= 1e-5);
  }
}

TEST_CASE("prefill input errors") {
  auto weights = make_weights();
  Transformer model(weights);
  SharedKvCache shared(weights->config.kv_dims());
  const std::vector<int> bad{1, 256};
  CHECK_THROWS_AS(model.prefill_forward(bad, shared), Error);
  try {
    SharedKvCache fresh(weights->config.kv_dims());
    model.prefill_forward(bad, fresh);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInput);
  }
  SharedKvCache full(weights->config.kv_dims());
  const std::vector<int> ok{1, 2};
  model.prefill_forward(ok, full);
  CHECK_THROWS_AS(model.prefill_forward(ok, full), Error);
}

TEST_CASE("incremental decode equals full recompute for small beams") {
  for (int bw : {1, 2, 5, 8}) {
    CAPTURE(bw);
    CHECK(worst_recompute_error(bw, 3, 37, 100 + bw, bw) <= 1e-5);
  }
}

TEST_CASE("incremental decode equals full recompute at beam width 128") {
  CHECK(worst_recompute_error(128, 3, 90, 7, 16) <= 1e-5);
}

TEST_CASE("identical beams produce identical rows") {
  auto weights = make_weights();
  const auto& cfg = weights->config;
  Transformer model(weights);
  SharedKvCache shared(cfg.kv_dims());
  UnsharedKvCache unshared(4, 3, cfg.kv_dims());
  const std::vector<int> prompt{3, 1, 4, 1, 5, 9, 2, 6};
  model.prefill_forward(prompt, shared);
  std::vector<float> logits(4 * cfg.vocab_size);
  const std::vector<int> tips{10, 10, 20, 10};
  model.decode_forward(tips, shared, unshared, 0, logits);
  const auto row = [&](int b) {
    return std::vector<float>(logits.begin() + b * cfg.vocab_size,
                              logits.begin() + (b + 1) * cfg.vocab_size);
  };
  CHECK(row(0) == row(1));
  CHECK(row(0) == row(3));
  CHECK(row(0) != row(2));
}

TEST_CASE("decode sequencing and input errors") {
  auto weights = make_weights();
  const auto& cfg = weights->config;
  Transformer model(weights);
  SharedKvCache shared(cfg.kv_dims());
  UnsharedKvCache unshared(2, 2, cfg.kv_dims());
  const std::vector<int> prompt{1, 2, 3};
  model.prefill_forward(prompt, shared);
  std::vector<float> logits(2 * cfg.vocab_size);
  const std::vector<int> tips{4, 5};
  auto code_of = [&](int step, std::span<const int> t) {
    try {
      model.decode_forward(t, shared, unshared, step, logits);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kIo;  // sentinel: no error
  };
  CHECK(code_of(1, tips) == ErrorCode::kSequencing);
  CHECK(code_of(-1, tips) == ErrorCode::kSequencing);
  const std::vector<int> bad{4, 999};
  CHECK(code_of(0, bad) == ErrorCode::kInput);
  model.decode_forward(tips, shared, unshared, 0, logits);
  model.decode_forward(tips, shared, unshared, 1, logits);
  CHECK(code_of(2, tips) == ErrorCode::kSequencing);
}

TEST_CASE("decode results do not depend on the attention lane split") {
  auto weights = make_weights();
  const auto& cfg = weights->config;
  Rng rng(21);
  const auto prompt = random_tokens(rng, 150, cfg.vocab_size);
  const auto tips = random_tokens(rng, 16, cfg.vocab_size);
  ThreadPool pool(2);
  std::vector<std::vector<float>> results;
  for (PartitionSetting lanes :
       {PartitionSetting{1, 1, 1}, PartitionSetting{3, 2, 2}}) {
    Transformer model(weights);
    model.set_attention_lanes(lanes, &pool);
    SharedKvCache shared(cfg.kv_dims());
    UnsharedKvCache unshared(16, 1, cfg.kv_dims());
    model.prefill_forward(prompt, shared);
    std::vector<float> logits(16 * cfg.vocab_size);
    model.decode_forward(tips, shared, unshared, 0, logits);
    results.push_back(logits);
  }
  CHECK(max_relative_error(results[1], results[0]) <= 1e-6);
}

TEST_CASE("paged baseline decode matches separated decode") {
  auto weights = make_weights();
  const auto& cfg = weights->config;
  Transformer model(weights);
  Rng rng(31);
  const int bw = 6;
  const auto prompt = random_tokens(rng, 45, cfg.vocab_size);
  SharedKvCache shared(cfg.kv_dims());
  UnsharedKvCache unshared(bw, 3, cfg.kv_dims());
  model.prefill_forward(prompt, shared);

  PagedKvConfig pcfg;
  pcfg.block_size = 16;
  pcfg.num_blocks = 256;
  pcfg.token_width = model.paged_token_width();
  PagedKvCache paged(pcfg);
  model.load_paged_prompt(shared, paged, bw);

  std::vector<float> separated(bw * cfg.vocab_size);
  std::vector<float> baseline(bw * cfg.vocab_size);
  ReorderPlan plan(bw);
  for (int step = 0; step < 3; ++step) {
    std::vector<int> src(bw);
    for (int b = 0; b < bw; ++b) {
      src[b] = step == 0 ? b : static_cast<int>(rng.below(bw));
    }
    plan_reorder(src, bw, plan);
    if (step > 0) {
      apply_reorder_in_place(unshared, plan);
    }
    const std::vector<int> ordered(plan.src.begin(), plan.src.end());
    paged.fork(ordered);
    paged.append_slots();
    const auto tips = random_tokens(rng, bw, cfg.vocab_size);
    model.decode_forward(tips, shared, unshared, step, separated);
    model.decode_forward_paged(tips, paged, baseline);
    CHECK(max_relative_error(baseline, separated) <= 1e-5);
  }
  CHECK(paged.refcounts_consistent());
}
