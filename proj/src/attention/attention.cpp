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

#include "attention/attention.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "common/errors.h"

namespace grserve {
namespace {

constexpr float kNegInf = -std::numeric_limits<float>::infinity();

struct TileScratch {
  std::vector<float> keys_t;  // [head][dim][tile], transposed
  std::vector<float> values;  // [head][tile][dim]
  std::vector<float> scores;  // [tile]

  void ensure(std::size_t heads, std::size_t dim, std::size_t tile) {
    const std::size_t n = heads * dim * tile;
    if (keys_t.size() < n) {
      keys_t.resize(n);
      values.resize(n);
    }
    if (scores.size() < tile) {
      scores.resize(tile);
    }
  }
};

TileScratch& scratch() {
  thread_local TileScratch s;
  return s;
}

// Loads positions [begin, begin + count) of a [pos][head][dim] KV plane
// into head-major scratch, keys transposed so score loops run over the
// tile dimension.
void load_tile(const float* keys, const float* values, std::size_t begin,
               int count, int heads, int dim, TileScratch& ts) {
  const std::size_t hw = static_cast<std::size_t>(heads) * dim;
  for (int h = 0; h < heads; ++h) {
    float* kt = ts.keys_t.data() + static_cast<std::size_t>(h) * dim * count;
    float* vt = ts.values.data() + static_cast<std::size_t>(h) * count * dim;
    for (int t = 0; t < count; ++t) {
      const float* k = keys + (begin + t) * hw + h * dim;
      const float* v = values + (begin + t) * hw + h * dim;
      for (int d = 0; d < dim; ++d) {
        kt[d * count + t] = k[d];
      }
      std::copy_n(v, dim, vt + static_cast<std::size_t>(t) * dim);
    }
  }
}

// One online-softmax update of (m, s, o) with `count` keys.
inline void apply_tile(const float* q, const float* keys_t,
                       const float* values, int count, int dim, float scale,
                       float* scores, float& m, float& s, float* o) {
  for (int t = 0; t < count; ++t) {
    scores[t] = 0.0f;
  }
  for (int d = 0; d < dim; ++d) {
    const float qd = q[d] * scale;
    const float* krow = keys_t + static_cast<std::size_t>(d) * count;
    for (int t = 0; t < count; ++t) {
      scores[t] += qd * krow[t];
    }
  }
  float tile_max = kNegInf;
  for (int t = 0; t < count; ++t) {
    tile_max = std::max(tile_max, scores[t]);
  }
  const float m_new = std::max(m, tile_max);
  const float correction = std::exp(m - m_new);
  float sum = s * correction;
  for (int d = 0; d < dim; ++d) {
    o[d] *= correction;
  }
  for (int t = 0; t < count; ++t) {
    const float p = std::exp(scores[t] - m_new);
    sum += p;
    const float* v = values + static_cast<std::size_t>(t) * dim;
    for (int d = 0; d < dim; ++d) {
      o[d] += p * v[d];
    }
  }
  s = sum;
  m = m_new;
}

int query_beams(std::span<const float> queries, const AttentionConfig& cfg) {
  const std::size_t hw = cfg.head_width();
  require(queries.size() % hw == 0, ErrorCode::kShape,
          "queries must be [beams][heads][head_dim]");
  return static_cast<int>(queries.size() / hw);
}

void check_partial(const PartialAttention& p, int beams,
                   const AttentionConfig& cfg) {
  require(p.beams == beams && p.heads == cfg.heads &&
              p.head_dim == cfg.head_dim,
          ErrorCode::kShape, "partial shape does not match queries");
}

}  // namespace

AttentionConfig AttentionConfig::make(int heads, int head_dim, int tile_size) {
  AttentionConfig cfg;
  cfg.heads = heads;
  cfg.head_dim = head_dim;
  cfg.scale = 1.0f / std::sqrt(static_cast<float>(head_dim));
  cfg.tile_size = tile_size;
  cfg.validate();
  return cfg;
}

void AttentionConfig::validate() const {
  require(heads >= 1 && head_dim >= 1, ErrorCode::kConfig,
          "attention heads and head_dim must be positive");
  require(scale > 0.0f, ErrorCode::kConfig, "attention scale must be > 0");
  require(tile_size >= 1, ErrorCode::kConfig, "tile size must be >= 1");
}

PartialAttention::PartialAttention(int beams, int heads, int head_dim) {
  reset(beams, heads, head_dim);
}

void PartialAttention::reset(int beams_, int heads_, int head_dim_) {
  beams = beams_;
  heads = heads_;
  head_dim = head_dim_;
  const std::size_t bh = static_cast<std::size_t>(beams) * heads;
  m.assign(bh, kNegInf);
  s.assign(bh, 0.0f);
  o.assign(bh * head_dim, 0.0f);
}

void attend_shared(std::span<const float> queries, const SharedKvLayer& layer,
                   const AttentionConfig& cfg, PartialAttention& out,
                   AttentionCounters* counters) {
  out.reset(query_beams(queries, cfg), cfg.heads, cfg.head_dim);
  attend_shared_range(queries, layer, cfg, 0, layer.length, out, counters);
}

void attend_shared_range(std::span<const float> queries,
                         const SharedKvLayer& layer, const AttentionConfig& cfg,
                         std::size_t begin, std::size_t end,
                         PartialAttention& out, AttentionCounters* counters) {
  cfg.validate();
  const int beams = query_beams(queries, cfg);
  check_partial(out, beams, cfg);
  const std::size_t hw = cfg.head_width();
  require(layer.keys.size() == layer.length * hw &&
              layer.values.size() == layer.keys.size(),
          ErrorCode::kShape, "shared KV layer does not match attention shape");
  require(begin <= end && end <= layer.length, ErrorCode::kShape,
          "shared range out of bounds");

  const int heads = cfg.heads;
  const int dim = cfg.head_dim;
  TileScratch& ts = scratch();
  ts.ensure(heads, dim, cfg.tile_size);
  for (std::size_t t0 = begin; t0 < end; t0 += cfg.tile_size) {
    const int count =
        static_cast<int>(std::min<std::size_t>(cfg.tile_size, end - t0));
    load_tile(layer.keys.data(), layer.values.data(), t0, count, heads, dim,
              ts);
    if (counters != nullptr) {
      ++counters->shared_tile_loads;
    }
    for (int h = 0; h < heads; ++h) {
      const float* kt = ts.keys_t.data() + static_cast<std::size_t>(h) * dim * count;
      const float* vt = ts.values.data() + static_cast<std::size_t>(h) * count * dim;
      for (int b = 0; b < beams; ++b) {
        const std::size_t bh = static_cast<std::size_t>(b) * heads + h;
        apply_tile(queries.data() + b * hw + h * dim, kt, vt, count, dim,
                   cfg.scale, ts.scores.data(), out.m[bh], out.s[bh],
                   out.o.data() + bh * dim);
      }
    }
  }
}

void attend_shared_per_beam(std::span<const float> queries,
                            const SharedKvLayer& layer,
                            const AttentionConfig& cfg, PartialAttention& out,
                            AttentionCounters* counters) {
  cfg.validate();
  const int beams = query_beams(queries, cfg);
  out.reset(beams, cfg.heads, cfg.head_dim);
  const std::size_t hw = cfg.head_width();
  require(layer.keys.size() == layer.length * hw, ErrorCode::kShape,
          "shared KV layer does not match attention shape");
  const int heads = cfg.heads;
  const int dim = cfg.head_dim;
  TileScratch& ts = scratch();
  ts.ensure(heads, dim, cfg.tile_size);
  for (int b = 0; b < beams; ++b) {
    for (std::size_t t0 = 0; t0 < layer.length; t0 += cfg.tile_size) {
      const int count = static_cast<int>(
          std::min<std::size_t>(cfg.tile_size, layer.length - t0));
      load_tile(layer.keys.data(), layer.values.data(), t0, count, heads, dim,
                ts);
      if (counters != nullptr) {
        ++counters->shared_tile_loads;
      }
      for (int h = 0; h < heads; ++h) {
        const std::size_t bh = static_cast<std::size_t>(b) * heads + h;
        apply_tile(queries.data() + b * hw + h * dim,
                   ts.keys_t.data() + static_cast<std::size_t>(h) * dim * count,
                   ts.values.data() + static_cast<std::size_t>(h) * count * dim,
                   count, dim, cfg.scale, ts.scores.data(), out.m[bh],
                   out.s[bh], out.o.data() + bh * dim);
      }
    }
  }
}

void attend_unshared(std::span<const float> queries,
                     const UnsharedKvLayer& layer, int step,
                     const AttentionConfig& cfg, PartialAttention& out,
                     AttentionCounters* counters) {
  const int beams = query_beams(queries, cfg);
  out.reset(beams, cfg.heads, cfg.head_dim);
  attend_unshared_beams(queries, layer, step, cfg, 0, beams, out);
  if (counters != nullptr) {
    counters->unshared_rows_read +=
        static_cast<std::uint64_t>(beams) * (step + 1);
  }
}

void attend_unshared_beams(std::span<const float> queries,
                           const UnsharedKvLayer& layer, int step,
                           const AttentionConfig& cfg, int beam_begin,
                           int beam_end, PartialAttention& out) {
  cfg.validate();
  const int beams = query_beams(queries, cfg);
  check_partial(out, beams, cfg);
  require(layer.head_width == cfg.head_width(), ErrorCode::kShape,
          "unshared KV layer does not match attention shape");
  require(beams <= layer.beams, ErrorCode::kShape,
          "more queries than cache beams");
  require(step >= 0 && step < layer.visible_steps, ErrorCode::kSequencing,
          "step " + std::to_string(step) + " not yet appended (" +
              std::to_string(layer.visible_steps) + " visible)");
  require(0 <= beam_begin && beam_begin <= beam_end && beam_end <= beams,
          ErrorCode::kShape, "beam range out of bounds");

  const int heads = cfg.heads;
  const int dim = cfg.head_dim;
  const int count = step + 1;
  const std::size_t hw = cfg.head_width();
  TileScratch& ts = scratch();
  ts.ensure(heads, dim, count);
  for (int b = beam_begin; b < beam_end; ++b) {
    load_tile(layer.beam_keys(b).data(), layer.beam_values(b).data(), 0, count,
              heads, dim, ts);
    for (int h = 0; h < heads; ++h) {
      const std::size_t bh = static_cast<std::size_t>(b) * heads + h;
      out.m[bh] = kNegInf;
      out.s[bh] = 0.0f;
      std::fill_n(out.o.data() + bh * dim, dim, 0.0f);
      apply_tile(queries.data() + b * hw + h * dim,
                 ts.keys_t.data() + static_cast<std::size_t>(h) * dim * count,
                 ts.values.data() + static_cast<std::size_t>(h) * count * dim,
                 count, dim, cfg.scale, ts.scores.data(), out.m[bh], out.s[bh],
                 out.o.data() + bh * dim);
    }
  }
}

}  // namespace grserve
