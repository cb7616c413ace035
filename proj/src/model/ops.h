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

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace grserve::ops {

// y[r][o] = sum_i x[r][i] * w[i][o]; y is overwritten.
void matmul(const float* x, std::size_t rows, std::size_t in, const float* w,
            std::size_t out, float* y);
// y[r][o] += sum_i x[r][i] * w[i][o].
void matmul_add(const float* x, std::size_t rows, std::size_t in,
                const float* w, std::size_t out, float* y);

void rms_norm(const float* x, std::size_t rows, std::size_t width,
              const float* gain, float* y);

inline float silu(float x) { return x / (1.0f + std::exp(-x)); }

// Rotates (x[i], x[i + dim/2]) pairs of every head in place by
// position * base^(-2i/dim).
void apply_rotary(float* x, int heads, int head_dim, std::size_t position);

// Max-subtracted log-softmax in double precision; out.size() == row.size().
void log_softmax(std::span<const float> row, std::span<double> out);
std::vector<double> log_softmax(std::span<const float> row);

}  // namespace grserve::ops
