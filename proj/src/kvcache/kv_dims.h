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

namespace grserve {

// Shape of one token's K (or V) across the model: `layers` planes of
// heads x head_dim floats.
struct KvDims {
  int layers = 1;
  int heads = 1;
  int head_dim = 1;

  std::size_t head_width() const {
    return static_cast<std::size_t>(heads) * static_cast<std::size_t>(head_dim);
  }
};

void validate_dims(const KvDims& dims);

}  // namespace grserve
