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

#include "kvcache/memory_stats.h"

#include <algorithm>

#include "kvcache/paged_kv_cache.h"
#include "kvcache/shared_kv_cache.h"
#include "kvcache/unshared_kv_cache.h"

namespace grserve {

void MemoryStats::absorb(const MemoryStats& other) {
  shared_token_slots = std::max(shared_token_slots, other.shared_token_slots);
  unshared_token_slots =
      std::max(unshared_token_slots, other.unshared_token_slots);
  baseline_token_slots =
      std::max(baseline_token_slots, other.baseline_token_slots);
  block_copies = std::max(block_copies, other.block_copies);
}

MemoryStats& MemoryStats::operator+=(const MemoryStats& other) {
  shared_token_slots += other.shared_token_slots;
  unshared_token_slots += other.unshared_token_slots;
  baseline_token_slots += other.baseline_token_slots;
  block_copies += other.block_copies;
  return *this;
}

std::uint64_t bytes_per_slot(int layers, int heads, int head_dim,
                             int bytes_per_value) {
  return 2ull * layers * heads * head_dim * bytes_per_value;
}

MemoryStats memory_report(const SharedKvCache* shared,
                          const UnsharedKvCache* unshared,
                          const PagedKvCache* baseline) {
  MemoryStats stats;
  if (shared != nullptr) {
    stats.shared_token_slots = shared->token_slots();
  }
  if (unshared != nullptr) {
    stats.unshared_token_slots = unshared->token_slots();
  }
  if (baseline != nullptr) {
    stats.baseline_token_slots = baseline->peak_token_slots();
    stats.block_copies = baseline->copy_count();
  }
  return stats;
}

nlohmann::json memory_record(const std::string& request_id,
                             const MemoryStats& stats) {
  nlohmann::json j = stats;
  j["request_id"] = request_id;
  return j;
}

void to_json(nlohmann::json& j, const MemoryStats& s) {
  j = nlohmann::json{{"shared_token_slots", s.shared_token_slots},
                     {"unshared_token_slots", s.unshared_token_slots},
                     {"baseline_token_slots", s.baseline_token_slots},
                     {"block_copies", s.block_copies}};
}

void from_json(const nlohmann::json& j, MemoryStats& s) {
  j.at("shared_token_slots").get_to(s.shared_token_slots);
  j.at("unshared_token_slots").get_to(s.unshared_token_slots);
  j.at("baseline_token_slots").get_to(s.baseline_token_slots);
  j.at("block_copies").get_to(s.block_copies);
}

}  // namespace grserve
