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
#include <string>

#include <json.hpp>

namespace grserve {

class SharedKvCache;
class UnsharedKvCache;
class PagedKvCache;

// Memory in token slots: one slot holds one token's K and V for every
// layer. Multiply by bytes_per_slot() to get bytes.
struct MemoryStats {
  std::uint64_t shared_token_slots = 0;
  std::uint64_t unshared_token_slots = 0;
  std::uint64_t baseline_token_slots = 0;
  std::uint64_t block_copies = 0;

  std::uint64_t separated_total() const {
    return shared_token_slots + unshared_token_slots;
  }

  // Component-wise max; counters only ever grow within a run.
  void absorb(const MemoryStats& other);
  MemoryStats& operator+=(const MemoryStats& other);
  bool operator==(const MemoryStats&) const = default;
};

std::uint64_t bytes_per_slot(int layers, int heads, int head_dim,
                             int bytes_per_value = 4);

// Any pointer may be null; its columns are reported as zero.
MemoryStats memory_report(const SharedKvCache* shared,
                          const UnsharedKvCache* unshared,
                          const PagedKvCache* baseline);

// {request_id, shared_token_slots, unshared_token_slots,
//  baseline_token_slots, block_copies}
nlohmann::json memory_record(const std::string& request_id,
                             const MemoryStats& stats);

void to_json(nlohmann::json& j, const MemoryStats& s);
void from_json(const nlohmann::json& j, MemoryStats& s);

}  // namespace grserve
