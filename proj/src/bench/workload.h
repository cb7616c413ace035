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

#include <json.hpp>

#include "common/rng.h"
#include "scheduler/request.h"

namespace grserve {

enum class ArrivalProcess { kPoisson, kUniform };

struct PromptLengthSpec {
  enum class Kind { kPowerLaw, kFixed };
  Kind kind = Kind::kPowerLaw;
  double alpha = 1.2;
  int min = 10;
  int max = 3000;
  int fixed = 100;
  bool operator==(const PromptLengthSpec&) const = default;
};

struct WorkloadSpec {
  double rps = 20.0;
  double duration_s = 2.0;
  ArrivalProcess arrival = ArrivalProcess::kPoisson;
  PromptLengthSpec prompt_len;
  std::uint64_t seed = 1;
  // Pre-tokenized prompts, one per line; when set, prompts are drawn from
  // the file in order (cycling) instead of from prompt_len.
  std::string prompts_path;

  void validate() const;
  bool operator==(const WorkloadSpec&) const = default;
};

void to_json(nlohmann::json& j, const WorkloadSpec& w);
// Unknown keys are rejected; missing keys keep their defaults.
void from_json(const nlohmann::json& j, WorkloadSpec& w);

// P(n) proportional to n^-alpha on [min, max], sampled by inverting the
// tabulated CDF.
class PowerLawLengths {
 public:
  PowerLawLengths(double alpha, int min, int max);
  int sample(Rng& rng) const;
  // P(length <= n).
  double cdf(int n) const;
  int min() const noexcept { return min_; }
  int max() const noexcept { return max_; }

 private:
  int min_;
  int max_;
  std::vector<double> cdf_;
};

// Deterministic in (spec, params, vocab_size). Request ids count from 0;
// arrival times are in microseconds from 0.
std::vector<Request> generate_workload(const WorkloadSpec& spec,
                                       const RequestParams& params,
                                       int vocab_size);

// One prompt per line as whitespace-separated token ids; blank lines are
// skipped. Ids must lie in [0, vocab_size).
std::vector<std::vector<int>> load_prompts(const std::string& path,
                                           int vocab_size);

}  // namespace grserve
