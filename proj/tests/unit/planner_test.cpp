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

#include <sstream>
#include <vector>

#include "attention/planner.h"
#include "common/errors.h"
#include "common/rng.h"

using namespace grserve;

namespace {

PlannerSample sample(double shared, double unshared, PartitionSetting s,
                     double latency) {
  PlannerSample p;
  p.shared_len = shared;
  p.unshared_len = unshared;
  p.setting = s;
  p.latency_s = latency;
  return p;
}

// Synthetic latency surface: the stages run in parallel, merge after.
double synthetic_latency(double shared, double unshared,
                         const PartitionSetting& s) {
  const double shared_t = s.lanes_shared > 0 ? shared / s.lanes_shared : 0;
  const double unshared_t =
      s.lanes_unshared > 0 ? unshared / s.lanes_unshared : 0;
  return 1e-6 * (std::max(shared_t, unshared_t) + 200.0 / s.lanes_merge +
                 30.0 * s.total());
}

}  // namespace

TEST_CASE("constant latency trains a single leaf") {
  std::vector<PlannerSample> samples;
  for (int i = 0; i < 10; ++i) {
    samples.push_back(sample(100 * i, 50, {1 + i % 3, 1, 1}, 0.25));
  }
  const auto model = train_planner(samples);
  CHECK(model.leaf_count() == 1);
  CHECK(model.predict(12345, 6, {2, 2, 2}) == doctest::Approx(0.25));
  CHECK(training_mse(model, samples) == doctest::Approx(0.0));
}

TEST_CASE("perfect shared_len split gives a depth-1 tree") {
  std::vector<PlannerSample> samples;
  for (int i = 0; i < 6; ++i) {
    samples.push_back(sample(100 + 10 * i, 300 + 7 * i, {1, 1, 1}, 1.0));
    samples.push_back(sample(800 + 10 * i, 300 + 7 * i, {1, 1, 1}, 3.0));
  }
  const auto model = train_planner(samples);
  REQUIRE(model.depth() == 1);
  const auto& root = model.nodes()[0];
  CHECK(root.feature == static_cast<int>(PlannerFeature::kSharedLen));
  CHECK(root.threshold == doctest::Approx(475.0));  // midpoint of 150 and 800
  CHECK(training_mse(model, samples) == doctest::Approx(0.0));
}

TEST_CASE("training MSE never exceeds target variance") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<PlannerSample> samples;
    double mean = 0;
    for (int i = 0; i < 60; ++i) {
      PartitionSetting s{1 + static_cast<int>(rng.below(4)),
                         1 + static_cast<int>(rng.below(4)),
                         1 + static_cast<int>(rng.below(2))};
      const double shared = static_cast<double>(rng.below(2000));
      const double lat = 0.001 + rng.uniform01();
      samples.push_back(sample(shared, static_cast<double>(rng.below(1500)), s, lat));
      mean += lat;
    }
    mean /= samples.size();
    double var = 0;
    for (const auto& s : samples) {
      var += (s.latency_s - mean) * (s.latency_s - mean);
    }
    var /= samples.size();
    const auto model = train_planner(samples, TreeOptions{6, 4});
    CHECK(training_mse(model, samples) <= var + 1e-12);
    CHECK(model.depth() <= 6);
  }
}

TEST_CASE("training errors") {
  try {
    train_planner({});
    FAIL("expected training error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTraining);
  }
  CHECK_THROWS_AS(train_planner({sample(1, 1, {1, 1, 1}, 1.0)}), Error);
}

TEST_CASE("JSON round trip preserves predictions") {
  std::vector<PlannerSample> samples;
  Rng rng(8);
  for (int i = 0; i < 80; ++i) {
    PartitionSetting s{1 + static_cast<int>(rng.below(5)),
                       1 + static_cast<int>(rng.below(3)), 1};
    const double shared = static_cast<double>(rng.below(1500));
    samples.push_back(sample(shared, 600, s, synthetic_latency(shared, 600, s)));
  }
  const auto model = train_planner(samples);
  const auto j = model.to_json();
  CHECK(j.contains("feature"));
  const auto back = PlannerModel::from_json(nlohmann::json::parse(j.dump()));
  for (const auto& s : samples) {
    CHECK(back.predict(s.features()) == model.predict(s.features()));
  }
  CHECK_THROWS_AS(PlannerModel::from_json(nlohmann::json{{"feature", "nope"}}),
                  Error);
}

TEST_CASE("CSV ingestion") {
  std::istringstream in(
      "latency_s,shared_len,unshared_len,lanes_shared,lanes_unshared,lanes_merge\n"
      "0.5,100,20,2,1,1\n"
      "\n"
      "0.25, 200 ,40,3,2,1\n");
  const auto samples = read_planner_samples(in);
  REQUIRE(samples.size() == 2);
  CHECK(samples[1].shared_len == 200);
  CHECK(samples[1].setting == PartitionSetting{3, 2, 1});
  CHECK(samples[0].latency_s == 0.5);

  std::istringstream bad("shared_len,unshared_len\n1,2\n");
  CHECK_THROWS_AS(read_planner_samples(bad), Error);
  std::istringstream garbage(
      "shared_len,unshared_len,lanes_shared,lanes_unshared,lanes_merge,latency_s\n"
      "1,2,x,1,1,0.1\n");
  try {
    read_planner_samples(garbage);
    FAIL("expected input error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInput);
  }
}

TEST_CASE("heuristic partition") {
  SUBCASE("empty shared stage") {
    const auto s = plan_partition(0, 300, 6);
    CHECK(s.lanes_shared == 0);
    CHECK(s.lanes_unshared + s.lanes_merge == 6);
    CHECK(s.lanes_unshared >= 1);
  }
  SUBCASE("prompt read by every beam outweighs generated tokens") {
    const auto s = plan_partition(1024, 512 * 3, 8, nullptr, 512);
    CHECK(s.lanes_shared >= s.lanes_unshared);
    CHECK(s.total() <= 8);
    CHECK(s.lanes_unshared >= 1);
    CHECK(s.lanes_merge >= 1);
  }
  SUBCASE("infeasible budget") {
    try {
      plan_partition(10, 10, 2);
      FAIL("expected configuration error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kConfig);
    }
  }
}

TEST_CASE("model-driven partition finds a planted optimum") {
  // Every triplet is measured; {3, 2, 1} is made strictly fastest.
  const PartitionSetting planted{3, 2, 1};
  std::vector<PlannerSample> samples;
  for (int ls = 1; ls <= 6; ++ls) {
    for (int lu = 1; lu <= 6; ++lu) {
      for (int lm = 1; ls + lu + lm <= 8; ++lm) {
        const PartitionSetting s{ls, lu, lm};
        const double lat = s == planted ? 0.001 : 0.010 + 0.001 * (ls + lu + lm);
        for (int rep = 0; rep < 4; ++rep) {
          samples.push_back(sample(1024, 1536, s, lat));
        }
      }
    }
  }
  const auto model = train_planner(samples, TreeOptions{12, 4});
  CHECK(plan_partition(1024, 1536, 8, &model) == planted);
}
