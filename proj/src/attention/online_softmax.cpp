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

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "attention/attention.h"
#include "common/errors.h"

// Compiled with -ffp-contract=off so combine stays bit-symmetric in its
// arguments.

namespace grserve {
namespace {

constexpr float kNegInf = -std::numeric_limits<float>::infinity();

}  // namespace

void combine_partials(const PartialAttention& a, const PartialAttention& b,
                      PartialAttention& out) {
  require(a.beams == b.beams && a.heads == b.heads && a.head_dim == b.head_dim,
          ErrorCode::kShape, "partials differ in shape");
  if (&out != &a && &out != &b) {
    out.reset(a.beams, a.heads, a.head_dim);
  }
  combine_partials_beams(a, b, out, 0, a.beams);
}

void combine_partials_beams(const PartialAttention& a,
                            const PartialAttention& b, PartialAttention& out,
                            int beam_begin, int beam_end) {
  const int heads = a.heads;
  const int dim = a.head_dim;
  for (int beam = beam_begin; beam < beam_end; ++beam) {
    for (int h = 0; h < heads; ++h) {
      const std::size_t bh = static_cast<std::size_t>(beam) * heads + h;
      const float m1 = a.m[bh];
      const float m2 = b.m[bh];
      const float s1 = a.s[bh];
      const float s2 = b.s[bh];
      if (s1 == 0.0f && s2 == 0.0f) {
        out.m[bh] = kNegInf;
        out.s[bh] = 0.0f;
        std::fill_n(out.o.data() + bh * dim, dim, 0.0f);
        continue;
      }
      const float m = std::max(m1, m2);
      const float w1 = s1 == 0.0f ? 0.0f : std::exp(m1 - m);
      const float w2 = s2 == 0.0f ? 0.0f : std::exp(m2 - m);
      const float* o1 = a.o.data() + bh * dim;
      const float* o2 = b.o.data() + bh * dim;
      float* o = out.o.data() + bh * dim;
      for (int d = 0; d < dim; ++d) {
        o[d] = o1[d] * w1 + o2[d] * w2;
      }
      out.s[bh] = s1 * w1 + s2 * w2;
      out.m[bh] = m;
    }
  }
}

void finalize_partial(const PartialAttention& p, std::span<float> output) {
  finalize_partial_beams(p, output, 0, p.beams);
}

void finalize_partial_beams(const PartialAttention& p, std::span<float> output,
                            int beam_begin, int beam_end) {
  const std::size_t bh_total = static_cast<std::size_t>(p.beams) * p.heads;
  require(output.size() == bh_total * p.head_dim, ErrorCode::kShape,
          "output must be [beams][heads][head_dim]");
  for (int beam = beam_begin; beam < beam_end; ++beam) {
    for (int h = 0; h < p.heads; ++h) {
      const std::size_t bh = static_cast<std::size_t>(beam) * p.heads + h;
      if (p.s[bh] == 0.0f) {
        fail(ErrorCode::kUndefinedAttention,
             "beam " + std::to_string(beam) + " head " + std::to_string(h) +
                 " has no visible keys");
      }
      const float inv = 1.0f / p.s[bh];
      for (int d = 0; d < p.head_dim; ++d) {
        output[bh * p.head_dim + d] = p.o[bh * p.head_dim + d] * inv;
      }
    }
  }
}

std::vector<float> merge_partials(const PartialAttention& p1,
                                  const PartialAttention& p2) {
  PartialAttention merged;
  combine_partials(p1, p2, merged);
  std::vector<float> output(merged.o.size());
  finalize_partial(merged, output);
  return output;
}

}  // namespace grserve
