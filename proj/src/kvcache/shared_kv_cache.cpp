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

#include "kvcache/shared_kv_cache.h"

#include <algorithm>
#include <string>

#include "common/errors.h"

namespace grserve {

void validate_dims(const KvDims& dims) {
  require(dims.layers >= 1 && dims.heads >= 1 && dims.head_dim >= 1,
          ErrorCode::kConfig, "model dimensions must be positive");
}

SharedKvCache::SharedKvCache(KvDims dims)
    : dims_(dims), keys_(dims.layers), values_(dims.layers) {
  validate_dims(dims_);
  written_.assign(dims_.layers, false);
}

void SharedKvCache::begin(std::size_t prompt_len) {
  require(!begun_, ErrorCode::kState, "shared cache already holds a prompt");
  require(prompt_len >= 1, ErrorCode::kInput, "prompt must be non-empty");
  prompt_len_ = prompt_len;
  begun_ = true;
  const std::size_t n = prompt_len * dims_.head_width();
  for (int l = 0; l < dims_.layers; ++l) {
    keys_[l].resize(n);
    values_[l].resize(n);
  }
  std::fill(written_.begin(), written_.end(), false);
}

void SharedKvCache::write_layer(int layer, std::span<const float> keys,
                                std::span<const float> values) {
  require(begun_, ErrorCode::kState, "shared cache not started");
  require(!sealed_, ErrorCode::kState, "shared cache is sealed");
  require(layer >= 0 && layer < dims_.layers, ErrorCode::kShape,
          "layer out of range");
  const std::size_t n = prompt_len_ * dims_.head_width();
  require(keys.size() == n && values.size() == n, ErrorCode::kShape,
          "prompt KV size mismatch for layer " + std::to_string(layer));
  std::copy(keys.begin(), keys.end(), keys_[layer].begin());
  std::copy(values.begin(), values.end(), values_[layer].begin());
  written_[layer] = true;
}

void SharedKvCache::seal() {
  require(begun_, ErrorCode::kState, "cannot seal an empty shared cache");
  require(std::all_of(written_.begin(), written_.end(), [](bool w) { return w; }),
          ErrorCode::kState, "seal before every layer was written");
  sealed_ = true;
}

void SharedKvCache::clear() {
  prompt_len_ = 0;
  begun_ = false;
  sealed_ = false;
  std::fill(written_.begin(), written_.end(), false);
}

SharedKvLayer SharedKvCache::layer(int layer) const {
  require(layer >= 0 && layer < dims_.layers, ErrorCode::kShape,
          "layer out of range");
  const std::size_t n = prompt_len_ * dims_.head_width();
  return SharedKvLayer{std::span<const float>(keys_[layer].data(), n),
                       std::span<const float>(values_[layer].data(), n),
                       prompt_len_};
}

}  // namespace grserve
