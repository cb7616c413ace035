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

#include <memory>
#include <vector>

#include "beam/vocabulary.h"
#include "common/rng.h"
#include "model/weights.h"
#include "scheduler/request.h"

namespace grserve::testing {

inline std::shared_ptr<const Weights> toy_weights() {
  static const auto weights =
      std::make_shared<const Weights>(init_weights(ModelConfig{}));
  return weights;
}

inline std::shared_ptr<const ItemVocabulary> toy_vocab(int depth = 3) {
  return std::make_shared<const ItemVocabulary>(
      random_vocabulary(depth, 256, 5000, 99));
}

// `count` requests with prompts of [min_len, max_len] tokens arriving
// every `spacing_us`.
inline std::vector<Request> toy_requests(int count, std::size_t min_len,
                                         std::size_t max_len,
                                         double spacing_us,
                                         RequestParams params = {},
                                         std::uint64_t seed = 1) {
  Rng rng(seed);
  std::vector<Request> out;
  for (int i = 0; i < count; ++i) {
    Request r;
    r.id = static_cast<std::uint64_t>(i);
    r.prompt.resize(min_len + rng.below(max_len - min_len + 1));
    for (auto& t : r.prompt) {
      t = static_cast<int>(rng.below(256));
    }
    r.arrival_us = spacing_us * i;
    r.params = params;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace grserve::testing
