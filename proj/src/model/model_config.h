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

#include <json.hpp>

#include "kvcache/kv_dims.h"

namespace grserve {

struct ModelConfig {
  int layers = 2;
  int heads = 4;
  int head_dim = 16;
  // Size of the per-level token codebook.
  int vocab_size = 256;
  // MLP width as a multiple of hidden.
  int ffn_mult = 2;
  int tile_size = 64;
  std::uint64_t seed = 42;

  int hidden() const { return heads * head_dim; }
  int ffn() const { return hidden() * ffn_mult; }
  KvDims kv_dims() const { return KvDims{layers, heads, head_dim}; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
// Unknown keys are rejected; missing keys keep their defaults.
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace grserve
