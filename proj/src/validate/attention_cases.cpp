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

#include "validate/attention_cases.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "attention/reference_attention.h"

namespace grserve::validate {
namespace {

void fill_normal(Rng& rng, std::span<float> out, float scale) {
  for (auto& x : out) {
    x = static_cast<float>(rng.normal()) * scale;
  }
}

}  // namespace

AttentionCase::AttentionCase(int beams_, int prompt_len_, int step_,
                             AttentionConfig cfg_, std::uint64_t seed)
    : beams(beams_),
      prompt_len(prompt_len_),
      step(step_),
      cfg(cfg_),
      shared(KvDims{1, cfg_.heads, cfg_.head_dim}),
      unshared(beams_, std::max(step_ + 1, 1),
               KvDims{1, cfg_.heads, cfg_.head_dim}) {
  Rng rng(seed);
  const std::size_t hw = cfg.head_width();
  queries.resize(beams * hw);
  fill_normal(rng, queries, 1.0f);

  std::vector<float> pk(prompt_len * hw);
  std::vector<float> pv(pk.size());
  fill_normal(rng, pk, 1.0f);
  fill_normal(rng, pv, 1.0f);
  if (prompt_len > 0) {
    shared.begin(prompt_len);
    shared.write_layer(0, pk, pv);
    shared.seal();
  }

  const int rows = step + 1;
  std::vector<std::vector<float>> gk(rows), gv(rows);
  for (int s = 0; s < rows; ++s) {
    gk[s].resize(beams * hw);
    gv[s].resize(beams * hw);
    fill_normal(rng, gk[s], 1.0f);
    fill_normal(rng, gv[s], 1.0f);
    unshared.append_layer(0, s, gk[s], gv[s]);
  }

  // Dense layout: prompt tokens, then beam 0's rows, beam 1's rows, ...
  const std::size_t tokens = prompt_len + static_cast<std::size_t>(beams) * rows;
  dense_keys = pk;
  dense_values = pv;
  dense_keys.reserve(tokens * hw);
  dense_values.reserve(tokens * hw);
  for (int b = 0; b < beams; ++b) {
    for (int s = 0; s < rows; ++s) {
      dense_keys.insert(dense_keys.end(), gk[s].begin() + b * hw,
                        gk[s].begin() + (b + 1) * hw);
      dense_values.insert(dense_values.end(), gv[s].begin() + b * hw,
                          gv[s].begin() + (b + 1) * hw);
    }
  }
  visible.assign(beams * tokens, 0);
  for (int b = 0; b < beams; ++b) {
    auto* row = visible.data() + b * tokens;
    std::fill_n(row, prompt_len, 1);
    std::fill_n(row + prompt_len + static_cast<std::size_t>(b) * rows, rows, 1);
  }
}

SharedKvLayer AttentionCase::shared_layer() const {
  if (prompt_len == 0) {
    return SharedKvLayer{};
  }
  return shared.layer(0);
}

std::vector<double> AttentionCase::reference() const {
  return full_attention_reference(queries, dense_keys, dense_values, visible,
                                  cfg.heads, cfg.head_dim);
}

double max_relative_error(std::span<const float> got,
                          std::span<const double> want) {
  if (got.size() != want.size()) {
    return std::numeric_limits<double>::infinity();
  }
  double max_err = 0;
  double max_mag = 0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    if (!std::isfinite(got[i])) {
      return std::numeric_limits<double>::infinity();
    }
    max_err = std::max(max_err, std::abs(static_cast<double>(got[i]) - want[i]));
    max_mag = std::max(max_mag, std::abs(want[i]));
  }
  return max_mag == 0 ? max_err : max_err / max_mag;
}

double max_relative_error(std::span<const float> got,
                          std::span<const float> want) {
  std::vector<double> w(want.begin(), want.end());
  return max_relative_error(got, w);
}

}  // namespace grserve::validate
