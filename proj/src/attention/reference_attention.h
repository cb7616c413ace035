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

namespace grserve {

// Dense softmax attention evaluated in double precision; the ground truth
// for the staged path.
//
// queries: [beams][heads][head_dim]; keys/values: [tokens][heads][head_dim];
// visible: [beams][tokens], nonzero where beam b may attend to token t.
// Logits are scaled by 1/sqrt(head_dim). A beam with no visible token
// yields zeros.
std::vector<double> full_attention_reference(std::span<const float> queries,
                                             std::span<const float> keys,
                                             std::span<const float> values,
                                             std::span<const std::uint8_t> visible,
                                             int heads, int head_dim);

}  // namespace grserve
