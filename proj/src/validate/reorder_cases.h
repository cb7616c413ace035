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
#include <span>
#include <vector>

#include "kvcache/unshared_kv_cache.h"

namespace grserve::validate {

// Fills every filled step of every beam with distinct values derived from
// (layer, beam, step, element), committing `steps` steps.
inline void fill_rows(UnsharedKvCache& cache, int steps) {
  const auto& dims = cache.dims();
  const std::size_t hw = dims.head_width();
  for (int s = 0; s < steps; ++s) {
    for (int l = 0; l < dims.layers; ++l) {
      std::vector<float> keys(cache.beam_width() * hw);
      std::vector<float> values(keys.size());
      for (std::size_t i = 0; i < keys.size(); ++i) {
        const std::size_t beam = i / hw;
        keys[i] = static_cast<float>(l * 100000 + beam * 1000 + s * 100 +
                                     static_cast<int>(i % hw));
        values[i] = -keys[i] - 0.5f;
      }
      cache.append_layer(l, s, keys, values);
    }
  }
}

// Row b = concatenation over layers of the filled K and V of beam b.
inline std::vector<std::vector<float>> snapshot_rows(UnsharedKvCache& cache) {
  const auto& dims = cache.dims();
  const std::size_t n = cache.filled_steps() * dims.head_width();
  std::vector<std::vector<float>> rows(cache.beam_width());
  for (int b = 0; b < cache.beam_width(); ++b) {
    for (int l = 0; l < dims.layers; ++l) {
      auto k = cache.beam_keys_mut(l, b);
      auto v = cache.beam_values_mut(l, b);
      rows[b].insert(rows[b].end(), k.begin(), k.begin() + n);
      rows[b].insert(rows[b].end(), v.begin(), v.begin() + n);
    }
  }
  return rows;
}

// Out-of-place gather: result row b = rows[src[b]], other rows unchanged.
inline std::vector<std::vector<float>> gather_rows(
    const std::vector<std::vector<float>>& rows, std::span<const int> src) {
  auto out = rows;
  for (std::size_t b = 0; b < src.size(); ++b) {
    out[b] = rows[src[b]];
  }
  return out;
}

}  // namespace grserve::validate
