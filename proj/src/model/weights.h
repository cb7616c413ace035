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
#include <string>
#include <vector>

#include "model/model_config.h"

namespace grserve {

struct LayerWeights {
  std::vector<float> attn_norm;  // [hidden]
  std::vector<float> wq;         // [hidden][hidden], y = x W
  std::vector<float> wk;
  std::vector<float> wv;
  std::vector<float> wo;
  std::vector<float> mlp_norm;   // [hidden]
  std::vector<float> w_up;       // [hidden][ffn]
  std::vector<float> w_down;     // [ffn][hidden]
};

// Immutable after construction; shared read-only by every lane.
struct Weights {
  ModelConfig config;
  std::vector<float> embedding;  // [vocab][hidden]
  std::vector<LayerWeights> layers;
  std::vector<float> final_norm;  // [hidden]
  std::vector<float> lm_head;     // [hidden][vocab]

  // FNV-1a over the little-endian bytes of every parameter in
  // serialization order.
  std::uint64_t checksum() const;
};

// Fills every parameter from an mt19937_64 stream seeded by config.seed.
// Draw order and float conversion are fixed, so results are bit-identical
// across runs and platforms.
Weights init_weights(const ModelConfig& config);

// <prefix>.bin holds little-endian float32 parameters back to back;
// <prefix>.json holds the config and one {name, shape, offset} entry per
// tensor.
void save_weights(const Weights& weights, const std::string& prefix);
Weights load_weights(const std::string& prefix);

}  // namespace grserve
