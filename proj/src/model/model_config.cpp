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

#include "model/model_config.h"

#include <string>

#include "common/errors.h"

namespace grserve {

void ModelConfig::validate() const {
  require(layers >= 1 && heads >= 1 && head_dim >= 1 && vocab_size >= 1 &&
              ffn_mult >= 1 && tile_size >= 1,
          ErrorCode::kConfig, "model dimensions must all be >= 1");
  require(head_dim % 2 == 0, ErrorCode::kConfig,
          "head_dim must be even for rotary positions");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"layers", c.layers},         {"heads", c.heads},
                     {"head_dim", c.head_dim},     {"vocab_size", c.vocab_size},
                     {"ffn_mult", c.ffn_mult},     {"tile_size", c.tile_size},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  require(j.is_object(), ErrorCode::kConfig, "model config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "layers") {
      value.get_to(c.layers);
    } else if (key == "heads") {
      value.get_to(c.heads);
    } else if (key == "head_dim") {
      value.get_to(c.head_dim);
    } else if (key == "vocab_size") {
      value.get_to(c.vocab_size);
    } else if (key == "ffn_mult") {
      value.get_to(c.ffn_mult);
    } else if (key == "tile_size") {
      value.get_to(c.tile_size);
    } else if (key == "seed") {
      value.get_to(c.seed);
    } else {
      fail(ErrorCode::kConfig, "unknown model key '" + key + "'");
    }
  }
}

}  // namespace grserve
