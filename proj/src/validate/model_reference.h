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

#include <span>
#include <vector>

#include "model/weights.h"

namespace grserve::validate {

// Full causal forward over `sequence` from scratch in double precision,
// with no caches. Returns the logits of the last position ([vocab]).
std::vector<double> recompute_logits(const Weights& weights,
                                     std::span<const int> sequence);

}  // namespace grserve::validate
