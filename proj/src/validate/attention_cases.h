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

#include "attention/attention.h"
#include "common/rng.h"
#include "kvcache/shared_kv_cache.h"
#include "kvcache/unshared_kv_cache.h"

namespace grserve::validate {

// A random staged-attention instance: prompt KV, `step + 1` generated rows
// per beam and one query per beam, plus the dense inputs the reference
// oracle needs (prompt followed by every beam's rows, with a visibility
// mask that hides other beams' rows).
struct AttentionCase {
  int beams = 1;
  int prompt_len = 0;
  int step = 0;
  AttentionConfig cfg;

  std::vector<float> queries;
  SharedKvCache shared;
  UnsharedKvCache unshared;

  std::vector<float> dense_keys;
  std::vector<float> dense_values;
  std::vector<std::uint8_t> visible;

  AttentionCase(int beams, int prompt_len, int step, AttentionConfig cfg,
                std::uint64_t seed);

  SharedKvLayer shared_layer() const;
  UnsharedKvLayer unshared_layer() const { return unshared.layer(0); }
  std::vector<double> reference() const;
};

// max_i |got_i - want_i| / max_i |want_i|: error relative to the output's
// magnitude, so near-zero components do not dominate.
double max_relative_error(std::span<const float> got,
                          std::span<const double> want);
double max_relative_error(std::span<const float> got,
                          std::span<const float> want);

}  // namespace grserve::validate
