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

#include <cstddef>
#include <span>
#include <vector>

#include "common/alloc_counter.h"
#include "kvcache/kv_dims.h"

namespace grserve {

// Read-only view of one layer of prompt KV, laid out [position][head][dim].
struct SharedKvLayer {
  std::span<const float> keys;
  std::span<const float> values;
  std::size_t length = 0;
};

// Prompt KV for one request, stored exactly once regardless of beam width.
// Filled layer by layer during prefill, then sealed; any write after
// seal() is a state error.
class SharedKvCache {
 public:
  explicit SharedKvCache(KvDims dims);

  // Sizes the cache for `prompt_len` tokens. Requires an empty cache.
  void begin(std::size_t prompt_len);
  void write_layer(int layer, std::span<const float> keys,
                   std::span<const float> values);
  void seal();
  // Drops contents but keeps capacity so the object can serve another request.
  void clear();

  bool sealed() const noexcept { return sealed_; }
  bool empty() const noexcept { return prompt_len_ == 0 && !begun_; }
  std::size_t prompt_len() const noexcept { return prompt_len_; }
  std::size_t token_slots() const noexcept { return prompt_len_; }
  const KvDims& dims() const noexcept { return dims_; }

  SharedKvLayer layer(int layer) const;

 private:
  KvDims dims_;
  std::size_t prompt_len_ = 0;
  bool begun_ = false;
  bool sealed_ = false;
  std::vector<bool> written_;
  std::vector<CountedVector<float>> keys_;
  std::vector<CountedVector<float>> values_;
};

}  // namespace grserve
