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

#include "kvcache/unshared_kv_cache.h"

#include <algorithm>
#include <limits>
#include <string>

#include "common/errors.h"

namespace grserve {
namespace {

std::size_t checked_capacity(int beam_width, int decode_steps,
                             const KvDims& dims) {
  require(beam_width >= 1 && decode_steps >= 1, ErrorCode::kConfig,
          "beam width and decode steps must be >= 1");
  validate_dims(dims);
  std::size_t total = 1;
  for (std::size_t f :
       {static_cast<std::size_t>(beam_width),
        static_cast<std::size_t>(decode_steps), dims.head_width(),
        static_cast<std::size_t>(dims.layers) * 2}) {
    require(total <= std::numeric_limits<std::size_t>::max() / sizeof(float) / f,
            ErrorCode::kConfig, "unshared cache dimensions overflow");
    total *= f;
  }
  return static_cast<std::size_t>(beam_width) * decode_steps *
         dims.head_width();
}

}  // namespace

UnsharedKvCache::UnsharedKvCache(int beam_width, int decode_steps, KvDims dims)
    : beam_width_(beam_width), decode_steps_(decode_steps), dims_(dims) {
  const std::size_t per_layer = checked_capacity(beam_width, decode_steps, dims);
  keys_.reserve(dims_.layers);
  values_.reserve(dims_.layers);
  for (int l = 0; l < dims_.layers; ++l) {
    keys_.emplace_back(per_layer, 0.0f);
    values_.emplace_back(per_layer, 0.0f);
  }
}

void UnsharedKvCache::append_layer(int layer, int step,
                                   std::span<const float> keys,
                                   std::span<const float> values) {
  require(step == filled_steps_, ErrorCode::kSequencing,
          "append for step " + std::to_string(step) + " but " +
              std::to_string(filled_steps_) + " steps are filled");
  require(step < decode_steps_, ErrorCode::kSequencing,
          "step exceeds decode capacity");
  require(layer == next_layer_, ErrorCode::kSequencing,
          "layers must be appended in order");
  const std::size_t hw = dims_.head_width();
  require(keys.size() == values.size() && keys.size() % hw == 0,
          ErrorCode::kShape, "step KV must be [beams][head][dim]");
  const std::size_t beams = keys.size() / hw;
  require(beams >= 1 && beams <= static_cast<std::size_t>(beam_width_),
          ErrorCode::kShape, "step KV beam count out of range");

  const std::size_t strip = strip_size();
  for (std::size_t b = 0; b < beams; ++b) {
    const std::size_t dst = b * strip + static_cast<std::size_t>(step) * hw;
    std::copy_n(keys.begin() + b * hw, hw, keys_[layer].begin() + dst);
    std::copy_n(values.begin() + b * hw, hw, values_[layer].begin() + dst);
  }
  if (++next_layer_ == dims_.layers) {
    next_layer_ = 0;
    ++filled_steps_;
  }
}

void UnsharedKvCache::append_step(
    int step, std::span<const std::span<const float>> keys,
    std::span<const std::span<const float>> values) {
  require(keys.size() == static_cast<std::size_t>(dims_.layers) &&
              values.size() == keys.size(),
          ErrorCode::kShape, "append_step needs one KV plane per layer");
  require(!step_open(), ErrorCode::kSequencing, "a step is partially written");
  for (int l = 0; l < dims_.layers; ++l) {
    append_layer(l, step, keys[l], values[l]);
  }
}

int UnsharedKvCache::visible_steps(int layer) const {
  require(layer >= 0 && layer < dims_.layers, ErrorCode::kShape,
          "layer out of range");
  return filled_steps_ + (layer < next_layer_ ? 1 : 0);
}

UnsharedKvLayer UnsharedKvCache::layer(int layer) const {
  const int visible = visible_steps(layer);
  UnsharedKvLayer view;
  view.keys = std::span<const float>(keys_[layer].data(), keys_[layer].size());
  view.values =
      std::span<const float>(values_[layer].data(), values_[layer].size());
  view.beams = beam_width_;
  view.capacity_steps = decode_steps_;
  view.visible_steps = visible;
  view.head_width = dims_.head_width();
  return view;
}

std::span<float> UnsharedKvCache::beam_keys_mut(int layer, int beam) {
  return std::span<float>(keys_[layer].data() + beam * strip_size(),
                          strip_size());
}

std::span<float> UnsharedKvCache::beam_values_mut(int layer, int beam) {
  return std::span<float>(values_[layer].data() + beam * strip_size(),
                          strip_size());
}

void UnsharedKvCache::reset() noexcept {
  filled_steps_ = 0;
  next_layer_ = 0;
}

}  // namespace grserve
