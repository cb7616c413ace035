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
#include <vector>

#include "kvcache/reorder.h"

namespace grserve::validate {

struct InvariantResult {
  std::string scope;
  std::string name;
  std::uint64_t passed = 0;
  std::uint64_t failed = 0;
  std::string first_failure;
  double seconds = 0.0;

  bool ok() const noexcept { return failed == 0 && passed > 0; }
};

struct ValidationOptions {
  std::uint64_t seed = 1;
  // Random monotone maps per beam width in {128, 512}.
  int reorder_random_maps = 1000;
  int attention_cases = 200;
  // Instances per (beam width, top-k) pair over {1, 8, 128, 512}^2.
  int selection_instances = 40;
  int validity_requests = 200;
  int scheduler_arrivals = 10000;
  // Mutation check: corrupts the reorder so the kvcache suite must fail.
  ReorderFault reorder_fault = ReorderFault::kNone;
};

std::vector<std::string> validation_scopes();

// Runs every invariant of `scope` (one of validation_scopes() or "all").
// Unknown scopes raise a config error.
std::vector<InvariantResult> run_validation(const std::string& scope,
                                            const ValidationOptions& options);

// Individual invariants.
InvariantResult check_reorder_exhaustive(const ValidationOptions& options);
InvariantResult check_reorder_random(const ValidationOptions& options);
InvariantResult check_reorder_allocations(const ValidationOptions& options);
InvariantResult check_paged_refcounts(const ValidationOptions& options);
InvariantResult check_unshared_slots(const ValidationOptions& options);

InvariantResult check_staged_attention(const ValidationOptions& options);
InvariantResult check_combine_symmetry(const ValidationOptions& options);
InvariantResult check_shared_tile_loads(const ValidationOptions& options);
InvariantResult check_lane_split(const ValidationOptions& options);

InvariantResult check_trie_membership(const ValidationOptions& options);
InvariantResult check_selection_oracle(const ValidationOptions& options);
InvariantResult check_masked_validity(const ValidationOptions& options);

// Capacity, quota bound, phase order, latency closure and liveness over
// one virtual-time run.
std::vector<InvariantResult> check_scheduler_contracts(
    const ValidationOptions& options);
InvariantResult check_scheduler_items(const ValidationOptions& options);

}  // namespace grserve::validate
