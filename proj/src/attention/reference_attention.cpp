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

#include "attention/reference_attention.h"

#include <cmath>
#include <limits>

#include "common/errors.h"

namespace grserve {

std::vector<double> full_attention_reference(std::span<const float> queries,
                                             std::span<const float> keys,
                                             std::span<const float> values,
                                             std::span<const std::uint8_t> visible,
                                             int heads, int head_dim) {
  const std::size_t hw = static_cast<std::size_t>(heads) * head_dim;
  require(hw > 0 && queries.size() % hw == 0 && keys.size() % hw == 0 &&
              keys.size() == values.size(),
          ErrorCode::kShape, "reference attention shape mismatch");
  const std::size_t beams = queries.size() / hw;
  const std::size_t tokens = keys.size() / hw;
  require(visible.size() == beams * tokens, ErrorCode::kShape,
          "visibility mask must be [beams][tokens]");
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  std::vector<double> out(beams * hw, 0.0);
  std::vector<double> logits(tokens);
  for (std::size_t b = 0; b < beams; ++b) {
    for (int h = 0; h < heads; ++h) {
      const float* q = queries.data() + b * hw + h * head_dim;
      double max_logit = -std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < tokens; ++t) {
        if (visible[b * tokens + t] == 0) {
          continue;
        }
        const float* k = keys.data() + t * hw + h * head_dim;
        double dot = 0.0;
        for (int d = 0; d < head_dim; ++d) {
          dot += static_cast<double>(q[d]) * static_cast<double>(k[d]);
        }
        logits[t] = dot * scale;
        max_logit = std::max(max_logit, logits[t]);
      }
      if (!std::isfinite(max_logit)) {
        continue;
      }
      double denom = 0.0;
      double* o = out.data() + b * hw + h * head_dim;
      for (std::size_t t = 0; t < tokens; ++t) {
        if (visible[b * tokens + t] == 0) {
          continue;
        }
        const double w = std::exp(logits[t] - max_logit);
        denom += w;
        const float* v = values.data() + t * hw + h * head_dim;
        for (int d = 0; d < head_dim; ++d) {
          o[d] += w * static_cast<double>(v[d]);
        }
      }
      for (int d = 0; d < head_dim; ++d) {
        o[d] /= denom;
      }
    }
  }
  return out;
}

}  // namespace grserve
