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

#include "model/ops.h"

#include <algorithm>
#include <cmath>

#include "common/errors.h"

namespace grserve::ops {

void matmul(const float* x, std::size_t rows, std::size_t in, const float* w,
            std::size_t out, float* y) {
  std::fill_n(y, rows * out, 0.0f);
  matmul_add(x, rows, in, w, out, y);
}

void matmul_add(const float* x, std::size_t rows, std::size_t in,
                const float* w, std::size_t out, float* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const float* xr = x + r * in;
    float* yr = y + r * out;
    for (std::size_t i = 0; i < in; ++i) {
      const float xi = xr[i];
      const float* wi = w + i * out;
      for (std::size_t o = 0; o < out; ++o) {
        yr[o] += xi * wi[o];
      }
    }
  }
}

void rms_norm(const float* x, std::size_t rows, std::size_t width,
              const float* gain, float* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const float* xr = x + r * width;
    float ss = 0.0f;
    for (std::size_t i = 0; i < width; ++i) {
      ss += xr[i] * xr[i];
    }
    const float inv = 1.0f / std::sqrt(ss / static_cast<float>(width) + 1e-5f);
    for (std::size_t i = 0; i < width; ++i) {
      y[r * width + i] = xr[i] * inv * gain[i];
    }
  }
}

void apply_rotary(float* x, int heads, int head_dim, std::size_t position) {
  const int half = head_dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq =
        std::pow(10000.0, -2.0 * static_cast<double>(i) / head_dim);
    const double angle = static_cast<double>(position) * freq;
    const float c = static_cast<float>(std::cos(angle));
    const float s = static_cast<float>(std::sin(angle));
    for (int h = 0; h < heads; ++h) {
      float* xh = x + static_cast<std::size_t>(h) * head_dim;
      const float a = xh[i];
      const float b = xh[i + half];
      xh[i] = a * c - b * s;
      xh[i + half] = a * s + b * c;
    }
  }
}

void log_softmax(std::span<const float> row, std::span<double> out) {
  require(out.size() == row.size(), ErrorCode::kShape,
          "log_softmax output size mismatch");
  if (row.empty()) {
    return;
  }
  double max_value = row[0];
  for (float v : row) {
    max_value = std::max(max_value, static_cast<double>(v));
  }
  double sum = 0.0;
  for (float v : row) {
    sum += std::exp(static_cast<double>(v) - max_value);
  }
  const double log_norm = max_value + std::log(sum);
  for (std::size_t i = 0; i < row.size(); ++i) {
    out[i] = static_cast<double>(row[i]) - log_norm;
  }
}

std::vector<double> log_softmax(std::span<const float> row) {
  std::vector<double> out(row.size());
  log_softmax(row, out);
  return out;
}

}  // namespace grserve::ops
