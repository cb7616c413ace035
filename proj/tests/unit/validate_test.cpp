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

#include <doctest.h>

#include "common/errors.h"
#include "validate/suites.h"

using namespace grserve;
using namespace grserve::validate;

namespace {

ValidationOptions quick() {
  ValidationOptions o;
  o.reorder_random_maps = 20;
  o.attention_cases = 45;
  o.selection_instances = 2;
  o.validity_requests = 40;
  o.scheduler_arrivals = 2000;
  return o;
}

}  // namespace

TEST_CASE("every validation scope passes on a clean build") {
  const auto results = run_validation("all", quick());
  CHECK(results.size() == 18);
  for (const auto& r : results) {
    INFO(r.scope, "/", r.name, ": ", r.first_failure);
    CHECK(r.ok());
  }
}

TEST_CASE("an injected reorder fault fails the kvcache scope") {
  ValidationOptions o = quick();
  o.reorder_fault = ReorderFault::kDescendingUpwardPass;
  const auto results = run_validation("kvcache", o);
  bool any_failed = false;
  for (const auto& r : results) {
    CHECK(r.scope == "kvcache");
    any_failed |= !r.ok();
  }
  CHECK(any_failed);
  CHECK_FALSE(check_reorder_exhaustive(o).ok());
  CHECK_FALSE(check_reorder_random(o).ok());
}

TEST_CASE("unknown scope") {
  CHECK_THROWS_AS(run_validation("model", quick()), Error);
  CHECK(run_validation("beam", quick()).size() == 3);
}
