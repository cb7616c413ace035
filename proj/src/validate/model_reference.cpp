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

#include "validate/model_reference.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "common/errors.h"

namespace grserve::validate {
namespace {

using Matrix = std::vector<double>;

// y[r][o] = sum_i x[r][i] * w[i][o]
Matrix project(const Matrix& x, std::size_t rows, std::size_t in,
               const std::vector<float>& w, std::size_t out) {
  Matrix y(rows * out, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = x[r * in + i];
      for (std::size_t o = 0; o < out; ++o) {
        y[r * out + o] += xi * w[i * out + o];
      }
    }
  }
  return y;
}

Matrix norm(const Matrix& x, std::size_t rows, std::size_t width,
            const std::vector<float>& gain) {
  Matrix y(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (std::size_t i = 0; i < width; ++i) {
      ss += x[r * width + i] * x[r * width + i];
    }
    const double inv = 1.0 / std::sqrt(ss / width + 1e-5);
    for (std::size_t i = 0; i < width; ++i) {
      y[r * width + i] = x[r * width + i] * inv * gain[i];
    }
  }
  return y;
}

void rotate(double* x, int heads, int dim, std::size_t position) {
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double angle = static_cast<double>(position) *
                         std::pow(10000.0, -2.0 * i / dim);
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (int h = 0; h < heads; ++h) {
      double* xh = x + static_cast<std::size_t>(h) * dim;
      const double a = xh[i];
      const double b = xh[i + half];
      xh[i] = a * c - b * s;
      xh[i + half] = a * s + b * c;
    }
  }
}

}  // namespace

std::vector<double> recompute_logits(const Weights& weights,
                                     std::span<const int> sequence) {
  const ModelConfig& cfg = weights.config;
  require(!sequence.empty(), ErrorCode::kInput, "sequence must be non-empty");
  const std::size_t n = sequence.size();
  const std::size_t hidden = cfg.hidden();
  const std::size_t ffn = cfg.ffn();
  const int heads = cfg.heads;
  const int dim = cfg.head_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));

  Matrix x(n * hidden);
  for (std::size_t t = 0; t < n; ++t) {
    require(sequence[t] >= 0 && sequence[t] < cfg.vocab_size,
            ErrorCode::kInput, "token id outside vocabulary");
    for (std::size_t i = 0; i < hidden; ++i) {
      x[t * hidden + i] = weights.embedding[sequence[t] * hidden + i];
    }
  }
  std::vector<double> scores(n);
  for (const LayerWeights& lw : weights.layers) {
    const Matrix h = norm(x, n, hidden, lw.attn_norm);
    Matrix q = project(h, n, hidden, lw.wq, hidden);
    Matrix k = project(h, n, hidden, lw.wk, hidden);
    const Matrix v = project(h, n, hidden, lw.wv, hidden);
    for (std::size_t t = 0; t < n; ++t) {
      rotate(q.data() + t * hidden, heads, dim, t);
      rotate(k.data() + t * hidden, heads, dim, t);
    }
    Matrix attn(n * hidden, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      for (int hd = 0; hd < heads; ++hd) {
        const std::size_t off = hd * dim;
        double max_score = -std::numeric_limits<double>::infinity();
        for (std::size_t u = 0; u <= t; ++u) {
          double dot = 0.0;
          for (int d = 0; d < dim; ++d) {
            dot += q[t * hidden + off + d] * k[u * hidden + off + d];
          }
          scores[u] = dot * scale;
          max_score = std::max(max_score, scores[u]);
        }
        double sum = 0.0;
        for (std::size_t u = 0; u <= t; ++u) {
          const double w = std::exp(scores[u] - max_score);
          sum += w;
          for (int d = 0; d < dim; ++d) {
            attn[t * hidden + off + d] += w * v[u * hidden + off + d];
          }
        }
        for (int d = 0; d < dim; ++d) {
          attn[t * hidden + off + d] /= sum;
        }
      }
    }
    const Matrix out = project(attn, n, hidden, lw.wo, hidden);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] += out[i];
    }
    const Matrix m = norm(x, n, hidden, lw.mlp_norm);
    Matrix up = project(m, n, hidden, lw.w_up, ffn);
    for (double& u : up) {
      u = u / (1.0 + std::exp(-u));
    }
    const Matrix down = project(up, n, ffn, lw.w_down, hidden);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] += down[i];
    }
  }
  const Matrix last(x.end() - hidden, x.end());
  const Matrix final_h = norm(last, 1, hidden, weights.final_norm);
  return project(final_h, 1, hidden, weights.lm_head, cfg.vocab_size);
}

}  // namespace grserve::validate
