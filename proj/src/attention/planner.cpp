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

#include "attention/planner.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "common/errors.h"

namespace grserve {
namespace {

constexpr std::array<std::string_view, kPlannerFeatureCount> kFeatureNames = {
    "shared_len", "unshared_len", "lanes_shared", "lanes_unshared",
    "lanes_merge"};

struct SplitChoice {
  int feature = -1;
  double threshold = 0;
  double sse = std::numeric_limits<double>::infinity();
  std::size_t left_count = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<PlannerSample>& samples,
              const TreeOptions& options)
      : options_(options) {
    x_.reserve(samples.size());
    y_.reserve(samples.size());
    for (const auto& s : samples) {
      x_.push_back(s.features());
      y_.push_back(s.latency_s);
    }
  }

  std::vector<PlannerModel::Node> build() {
    std::vector<std::size_t> idx(y_.size());
    std::iota(idx.begin(), idx.end(), 0);
    grow(idx, 0);
    return std::move(nodes_);
  }

 private:
  int grow(std::vector<std::size_t>& idx, int depth) {
    double sum = 0;
    double sum_sq = 0;
    for (std::size_t i : idx) {
      sum += y_[i];
      sum_sq += y_[i] * y_[i];
    }
    const double n = static_cast<double>(idx.size());
    const double mean = sum / n;
    const double parent_sse = std::max(0.0, sum_sq - sum * sum / n);

    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(PlannerModel::Node{});
    nodes_[id].leaf_latency = mean;

    if (depth >= options_.max_depth || idx.size() < 2 * options_.min_leaf ||
        parent_sse <= 1e-12 * std::max(1.0, sum_sq)) {
      return id;
    }
    const SplitChoice split = best_split(idx);
    if (split.feature < 0 || split.sse >= parent_sse * (1.0 - 1e-12)) {
      return id;
    }
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (std::size_t i : idx) {
      (x_[i][split.feature] <= split.threshold ? left : right).push_back(i);
    }
    nodes_[id].feature = split.feature;
    nodes_[id].threshold = split.threshold;
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  SplitChoice best_split(const std::vector<std::size_t>& idx) const {
    SplitChoice best;
    std::vector<std::size_t> order(idx);
    const std::size_t n = order.size();
    for (std::size_t f = 0; f < kPlannerFeatureCount; ++f) {
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) {
                         return x_[a][f] < x_[b][f];
                       });
      double total = 0;
      double total_sq = 0;
      for (std::size_t i : order) {
        total += y_[i];
        total_sq += y_[i] * y_[i];
      }
      double left_sum = 0;
      double left_sq = 0;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        const double y = y_[order[k]];
        left_sum += y;
        left_sq += y * y;
        const std::size_t nl = k + 1;
        const std::size_t nr = n - nl;
        const double v = x_[order[k]][f];
        const double v_next = x_[order[k + 1]][f];
        if (v == v_next || nl < options_.min_leaf || nr < options_.min_leaf) {
          continue;
        }
        const double right_sum = total - left_sum;
        const double right_sq = total_sq - left_sq;
        const double sse = (left_sq - left_sum * left_sum / nl) +
                           (right_sq - right_sum * right_sum / nr);
        if (sse < best.sse - 1e-12 * std::max(1.0, total_sq)) {
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (v + v_next);
          best.sse = sse;
          best.left_count = nl;
        }
      }
    }
    return best;
  }

  TreeOptions options_;
  std::vector<std::array<double, kPlannerFeatureCount>> x_;
  std::vector<double> y_;
  std::vector<PlannerModel::Node> nodes_;
};

nlohmann::json node_to_json(const std::vector<PlannerModel::Node>& nodes,
                            int id) {
  const auto& node = nodes[id];
  if (node.feature < 0) {
    return nlohmann::json{{"leaf_latency", node.leaf_latency}};
  }
  return nlohmann::json{
      {"feature", std::string(planner_feature_name(
                      static_cast<PlannerFeature>(node.feature)))},
      {"threshold", node.threshold},
      {"left", node_to_json(nodes, node.left)},
      {"right", node_to_json(nodes, node.right)}};
}

int node_from_json(const nlohmann::json& j,
                   std::vector<PlannerModel::Node>& nodes) {
  require(j.is_object(), ErrorCode::kInput, "planner node must be an object");
  const int id = static_cast<int>(nodes.size());
  nodes.push_back(PlannerModel::Node{});
  if (j.contains("leaf_latency")) {
    const double v = j.at("leaf_latency").get<double>();
    require(v > 0 && std::isfinite(v), ErrorCode::kInput,
            "leaf latency must be positive");
    nodes[id].leaf_latency = v;
    return id;
  }
  const auto feature =
      parse_planner_feature(j.at("feature").get<std::string>());
  require(feature.has_value(), ErrorCode::kInput, "unknown planner feature");
  nodes[id].feature = static_cast<int>(*feature);
  nodes[id].threshold = j.at("threshold").get<double>();
  const int l = node_from_json(j.at("left"), nodes);
  const int r = node_from_json(j.at("right"), nodes);
  nodes[id].left = l;
  nodes[id].right = r;
  return id;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos
                        ? std::string()
                        : cell.substr(first, last - first + 1));
  }
  return cells;
}

double parse_number(const std::string& cell, std::size_t line_no) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == cell.size() && used > 0 && std::isfinite(v),
          ErrorCode::kInput,
          "line " + std::to_string(line_no) + ": bad number '" + cell + "'");
  return v;
}

}  // namespace

std::string_view planner_feature_name(PlannerFeature f) {
  return kFeatureNames.at(static_cast<std::size_t>(f));
}

std::optional<PlannerFeature> parse_planner_feature(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureNames.size(); ++i) {
    if (kFeatureNames[i] == name) {
      return static_cast<PlannerFeature>(i);
    }
  }
  return std::nullopt;
}

std::array<double, kPlannerFeatureCount> PlannerSample::features() const {
  return {shared_len, unshared_len, static_cast<double>(setting.lanes_shared),
          static_cast<double>(setting.lanes_unshared),
          static_cast<double>(setting.lanes_merge)};
}

PlannerModel::PlannerModel(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
  require(!nodes_.empty(), ErrorCode::kInput, "planner model has no nodes");
}

double PlannerModel::predict(
    const std::array<double, kPlannerFeatureCount>& x) const {
  require(!nodes_.empty(), ErrorCode::kState, "planner model is empty");
  int id = 0;
  while (nodes_[id].feature >= 0) {
    const auto& node = nodes_[id];
    id = x[node.feature] <= node.threshold ? node.left : node.right;
  }
  return nodes_[id].leaf_latency;
}

double PlannerModel::predict(std::size_t shared_len, std::size_t unshared_len,
                             const PartitionSetting& s) const {
  return predict({static_cast<double>(shared_len),
                  static_cast<double>(unshared_len),
                  static_cast<double>(s.lanes_shared),
                  static_cast<double>(s.lanes_unshared),
                  static_cast<double>(s.lanes_merge)});
}

std::size_t PlannerModel::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(),
                    [](const Node& n) { return n.feature < 0; }));
}

int PlannerModel::depth() const {
  std::function<int(int)> rec = [&](int id) -> int {
    const auto& n = nodes_[id];
    return n.feature < 0 ? 0 : 1 + std::max(rec(n.left), rec(n.right));
  };
  return nodes_.empty() ? 0 : rec(0);
}

nlohmann::json PlannerModel::to_json() const {
  require(!nodes_.empty(), ErrorCode::kState, "planner model is empty");
  return node_to_json(nodes_, 0);
}

PlannerModel PlannerModel::from_json(const nlohmann::json& j) {
  std::vector<Node> nodes;
  try {
    node_from_json(j, nodes);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInput, std::string("malformed planner model: ") + e.what());
  }
  return PlannerModel(std::move(nodes));
}

PlannerModel train_planner(const std::vector<PlannerSample>& samples,
                           const TreeOptions& options) {
  require(samples.size() >= 2, ErrorCode::kTraining,
          "planner training needs at least 2 samples");
  require(options.max_depth >= 0 && options.min_leaf >= 1,
          ErrorCode::kTraining, "invalid tree options");
  for (const auto& s : samples) {
    require(s.latency_s > 0 && std::isfinite(s.latency_s),
            ErrorCode::kTraining, "sample latency must be positive");
  }
  return PlannerModel(TreeBuilder(samples, options).build());
}

double training_mse(const PlannerModel& model,
                    const std::vector<PlannerSample>& samples) {
  require(!samples.empty(), ErrorCode::kInput, "no samples");
  double sum = 0;
  for (const auto& s : samples) {
    const double err = model.predict(s.features()) - s.latency_s;
    sum += err * err;
  }
  return sum / static_cast<double>(samples.size());
}

std::vector<PlannerSample> read_planner_samples(std::istream& in) {
  static const std::array<std::string, 6> kColumns = {
      "shared_len",     "unshared_len", "lanes_shared",
      "lanes_unshared", "lanes_merge",  "latency_s"};
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kInput,
          "planner CSV is empty");
  const auto header = split_csv_line(line);
  std::array<std::size_t, 6> pos{};
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    const auto it = std::find(header.begin(), header.end(), kColumns[c]);
    require(it != header.end(), ErrorCode::kInput,
            "planner CSV missing column " + kColumns[c]);
    pos[c] = static_cast<std::size_t>(it - header.begin());
  }
  std::vector<PlannerSample> samples;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    const auto cells = split_csv_line(line);
    require(cells.size() == header.size(), ErrorCode::kInput,
            "line " + std::to_string(line_no) + ": expected " +
                std::to_string(header.size()) + " columns");
    std::array<double, 6> v{};
    for (std::size_t c = 0; c < 6; ++c) {
      v[c] = parse_number(cells[pos[c]], line_no);
    }
    PlannerSample s;
    s.shared_len = v[0];
    s.unshared_len = v[1];
    s.setting = {static_cast<int>(v[2]), static_cast<int>(v[3]),
                 static_cast<int>(v[4])};
    s.latency_s = v[5];
    samples.push_back(s);
  }
  return samples;
}

std::vector<PlannerSample> read_planner_samples_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open " + path);
  return read_planner_samples(in);
}

PartitionSetting plan_partition(std::size_t shared_len,
                                std::size_t unshared_len, int total_lanes,
                                const PlannerModel* model, int beam_width) {
  const bool has_shared = shared_len > 0;
  const bool has_unshared = unshared_len > 0;
  require(has_shared || has_unshared, ErrorCode::kConfig,
          "attention with no keys has no partition");
  const int stages = (has_shared ? 1 : 0) + (has_unshared ? 1 : 0) + 1;
  require(total_lanes >= stages, ErrorCode::kConfig,
          "need at least " + std::to_string(stages) + " lanes, got " +
              std::to_string(total_lanes));

  if (model != nullptr) {
    PartitionSetting best;
    double best_latency = std::numeric_limits<double>::infinity();
    const int max_shared = has_shared ? total_lanes : 0;
    const int max_unshared = has_unshared ? total_lanes : 0;
    for (int ls = has_shared ? 1 : 0; ls <= max_shared; ++ls) {
      for (int lu = has_unshared ? 1 : 0; lu <= max_unshared; ++lu) {
        for (int lm = 1; ls + lu + lm <= total_lanes; ++lm) {
          const PartitionSetting s{ls, lu, lm};
          const double t = model->predict(shared_len, unshared_len, s);
          if (t < best_latency) {
            best_latency = t;
            best = s;
          }
        }
      }
    }
    return best;
  }

  const int merge = std::max(1, total_lanes / 8);
  const int rest = total_lanes - merge;
  if (!has_shared) {
    return {0, rest, merge};
  }
  if (!has_unshared) {
    return {rest, 0, merge};
  }
  const double shared_work =
      static_cast<double>(shared_len) * std::max(beam_width, 1);
  const double unshared_work = static_cast<double>(unshared_len);
  int shared = static_cast<int>(
      std::lround(rest * shared_work / (shared_work + unshared_work)));
  shared = std::clamp(shared, 1, rest - 1);
  return {shared, rest - shared, merge};
}

}  // namespace grserve
