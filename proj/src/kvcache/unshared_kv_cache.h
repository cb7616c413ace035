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

#include <cstddef>
#include <span>
#include <vector>

#include "common/alloc_counter.h"
#include "kvcache/kv_dims.h"

namespace grserve {

// Read-only view of one layer of generated-token KV. Each beam owns a
// contiguous strip of `capacity_steps` rows laid out [step][head][dim];
// only the first `visible_steps` rows of each strip are meaningful.
struct UnsharedKvLayer {
  std::span<const float> keys;
  std::span<const float> values;
  int beams = 0;
  int capacity_steps = 0;
  int visible_steps = 0;
  std::size_t head_width = 0;

  std::span<const float> beam_keys(int beam) const {
    return keys.subspan(beam_offset(beam), visible_steps * head_width);
  }
  std::span<const float> beam_values(int beam) const {
    return values.subspan(beam_offset(beam), visible_steps * head_width);
  }

 private:
  std::size_t beam_offset(int beam) const {
    return static_cast<std::size_t>(beam) * capacity_steps * head_width;
  }
};

// Per-beam KV of generated tokens. Capacity per layer is exactly
// beam_width x decode_steps token slots, allocated once at construction.
//
// Steps are written layer by layer: append_layer(l, step, ...) must be
// called for l = 0..layers-1 in order, and the step counts as filled once
// the last layer lands. Attention for layer l may read the open step as
// soon as layer l of it is written.
class UnsharedKvCache {
 public:
  UnsharedKvCache(int beam_width, int decode_steps, KvDims dims);

  int beam_width() const noexcept { return beam_width_; }
  int decode_steps() const noexcept { return decode_steps_; }
  int filled_steps() const noexcept { return filled_steps_; }
  bool step_open() const noexcept { return next_layer_ != 0; }
  const KvDims& dims() const noexcept { return dims_; }

  std::size_t capacity_per_layer() const noexcept {
    return static_cast<std::size_t>(beam_width_) * decode_steps_;
  }
  std::size_t token_slots() const noexcept { return capacity_per_layer(); }

  // keys/values are [beams][head][dim] for beams <= beam_width.
  void append_layer(int layer, int step, std::span<const float> keys,
                    std::span<const float> values);
  // All layers at once: keys[l] / values[l] per layer.
  void append_step(int step, std::span<const std::span<const float>> keys,
                   std::span<const std::span<const float>> values);

  // Number of steps layer `layer` can currently see.
  int visible_steps(int layer) const;

  UnsharedKvLayer layer(int layer) const;

  // Contiguous strip of beam `beam` in layer `layer`: [capacity][head][dim].
  std::span<float> beam_keys_mut(int layer, int beam);
  std::span<float> beam_values_mut(int layer, int beam);

  // Forget contents; capacity is retained.
  void reset() noexcept;

 private:
  std::size_t strip_size() const noexcept {
    return static_cast<std::size_t>(decode_steps_) * dims_.head_width();
  }

  int beam_width_;
  int decode_steps_;
  KvDims dims_;
  int filled_steps_ = 0;
  int next_layer_ = 0;
  std::vector<CountedVector<float>> keys_;
  std::vector<CountedVector<float>> values_;
};

}  // namespace grserve
