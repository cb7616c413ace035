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

#include <array>
#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace grserve {

// Lanes given to the shared, unshared and merge stages of one attention call.
struct PartitionSetting {
  int lanes_shared = 1;
  int lanes_unshared = 1;
  int lanes_merge = 1;

  int total() const { return lanes_shared + lanes_unshared + lanes_merge; }
  bool operator==(const PartitionSetting&) const = default;
};

enum class PlannerFeature : int {
  kSharedLen = 0,
  kUnsharedLen,
  kLanesShared,
  kLanesUnshared,
  kLanesMerge,
};
inline constexpr std::size_t kPlannerFeatureCount = 5;

std::string_view planner_feature_name(PlannerFeature f);
std::optional<PlannerFeature> parse_planner_feature(std::string_view name);

struct PlannerSample {
  double shared_len = 0;
  double unshared_len = 0;
  PartitionSetting setting;
  double latency_s = 0;

  std::array<double, kPlannerFeatureCount> features() const;
};

struct TreeOptions {
  int max_depth = 6;
  std::size_t min_leaf = 4;
};

// Regression tree over (shared_len, unshared_len, lanes_shared,
// lanes_unshared, lanes_merge). Samples with feature <= threshold go left.
class PlannerModel {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0;
    int left = -1;
    int right = -1;
    double leaf_latency = 0;
  };

  PlannerModel() = default;
  explicit PlannerModel(std::vector<Node> nodes);

  double predict(const std::array<double, kPlannerFeatureCount>& x) const;
  double predict(std::size_t shared_len, std::size_t unshared_len,
                 const PartitionSetting& s) const;

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::size_t leaf_count() const;
  int depth() const;

  nlohmann::json to_json() const;
  static PlannerModel from_json(const nlohmann::json& j);

 private:
  std::vector<Node> nodes_;
};

// CART with squared-error splits. Deterministic: ties prefer the lower
// feature index, then the lower threshold.
PlannerModel train_planner(const std::vector<PlannerSample>& samples,
                           const TreeOptions& options = {});

double training_mse(const PlannerModel& model,
                    const std::vector<PlannerSample>& samples);

// Columns: shared_len, unshared_len, lanes_shared, lanes_unshared,
// lanes_merge, latency_s (header required, any column order).
std::vector<PlannerSample> read_planner_samples(std::istream& in);
std::vector<PlannerSample> read_planner_samples_file(const std::string& path);

// Picks a lane split for one attention call. With a model, returns the
// feasible triplet of minimum predicted latency; otherwise splits lanes in
// proportion to stage work, where each prompt token is read by
// `beam_width` queries and each generated token by one.
PartitionSetting plan_partition(std::size_t shared_len,
                                std::size_t unshared_len, int total_lanes,
                                const PlannerModel* model = nullptr,
                                int beam_width = 1);

}  // namespace grserve
