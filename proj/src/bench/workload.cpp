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

#include "bench/workload.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "common/errors.h"

namespace grserve {

void WorkloadSpec::validate() const {
  require(rps > 0.0, ErrorCode::kConfig, "workload rps must be positive");
  require(duration_s > 0.0, ErrorCode::kConfig,
          "workload duration_s must be positive");
  if (prompt_len.kind == PromptLengthSpec::Kind::kFixed) {
    require(prompt_len.fixed >= 1, ErrorCode::kConfig,
            "fixed prompt length must be positive");
  } else {
    require(prompt_len.min >= 1 && prompt_len.min <= prompt_len.max,
            ErrorCode::kConfig, "prompt length needs 1 <= min <= max");
    require(prompt_len.alpha > 0.0, ErrorCode::kConfig,
            "power-law alpha must be positive");
  }
}

void to_json(nlohmann::json& j, const WorkloadSpec& w) {
  nlohmann::json len;
  if (w.prompt_len.kind == PromptLengthSpec::Kind::kFixed) {
    len = {{"dist", "fixed"}, {"n", w.prompt_len.fixed}};
  } else {
    len = {{"dist", "power_law"},
           {"alpha", w.prompt_len.alpha},
           {"min", w.prompt_len.min},
           {"max", w.prompt_len.max}};
  }
  j = nlohmann::json{
      {"rps", w.rps},
      {"duration_s", w.duration_s},
      {"arrival", w.arrival == ArrivalProcess::kPoisson ? "poisson" : "uniform"},
      {"prompt_len", len},
      {"seed", w.seed},
      {"prompts_path", w.prompts_path}};
}

namespace {

void length_from_json(const nlohmann::json& j, PromptLengthSpec& p) {
  require(j.is_object(), ErrorCode::kConfig, "prompt_len must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "dist") {
      const auto dist = value.get<std::string>();
      require(dist == "power_law" || dist == "fixed", ErrorCode::kConfig,
              "prompt_len.dist must be 'power_law' or 'fixed'");
      p.kind = dist == "fixed" ? PromptLengthSpec::Kind::kFixed
                               : PromptLengthSpec::Kind::kPowerLaw;
    } else if (key == "alpha") {
      p.alpha = value.get<double>();
    } else if (key == "min") {
      p.min = value.get<int>();
    } else if (key == "max") {
      p.max = value.get<int>();
    } else if (key == "n") {
      p.fixed = value.get<int>();
    } else {
      fail(ErrorCode::kConfig, "unknown prompt_len key '" + key + "'");
    }
  }
}

}  // namespace

void from_json(const nlohmann::json& j, WorkloadSpec& w) {
  require(j.is_object(), ErrorCode::kConfig, "workload must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "rps") {
      w.rps = value.get<double>();
    } else if (key == "duration_s") {
      w.duration_s = value.get<double>();
    } else if (key == "arrival") {
      const auto arrival = value.get<std::string>();
      require(arrival == "poisson" || arrival == "uniform", ErrorCode::kConfig,
              "arrival must be 'poisson' or 'uniform'");
      w.arrival = arrival == "uniform" ? ArrivalProcess::kUniform
                                       : ArrivalProcess::kPoisson;
    } else if (key == "prompt_len") {
      length_from_json(value, w.prompt_len);
    } else if (key == "seed") {
      w.seed = value.get<std::uint64_t>();
    } else if (key == "prompts_path") {
      w.prompts_path = value.get<std::string>();
    } else {
      fail(ErrorCode::kConfig, "unknown workload key '" + key + "'");
    }
  }
}

PowerLawLengths::PowerLawLengths(double alpha, int min, int max)
    : min_(min), max_(max) {
  require(min >= 1 && min <= max, ErrorCode::kConfig,
          "power law needs 1 <= min <= max");
  cdf_.resize(static_cast<std::size_t>(max - min + 1));
  double total = 0.0;
  for (int n = min; n <= max; ++n) {
    total += std::pow(static_cast<double>(n), -alpha);
    cdf_[static_cast<std::size_t>(n - min)] = total;
  }
  for (double& c : cdf_) {
    c /= total;
  }
  cdf_.back() = 1.0;
}

int PowerLawLengths::sample(Rng& rng) const {
  const double u = rng.uniform01();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return min_ + static_cast<int>(it - cdf_.begin());
}

double PowerLawLengths::cdf(int n) const {
  if (n < min_) {
    return 0.0;
  }
  if (n >= max_) {
    return 1.0;
  }
  return cdf_[static_cast<std::size_t>(n - min_)];
}

std::vector<Request> generate_workload(const WorkloadSpec& spec,
                                       const RequestParams& params,
                                       int vocab_size) {
  spec.validate();
  require(vocab_size >= 1, ErrorCode::kConfig, "vocab_size must be positive");
  std::vector<std::vector<int>> prompts;
  if (!spec.prompts_path.empty()) {
    prompts = load_prompts(spec.prompts_path, vocab_size);
    require(!prompts.empty(), ErrorCode::kInput,
            "prompt file '" + spec.prompts_path + "' holds no prompts");
  }

  // Separate streams keep arrivals identical when only lengths change.
  Rng arrivals(spec.seed);
  Rng lengths(spec.seed ^ 0x9e3779b97f4a7c15ull);
  Rng tokens(spec.seed ^ 0xc2b2ae3d27d4eb4full);
  const double horizon_us = spec.duration_s * 1e6;
  std::vector<double> times;
  if (spec.arrival == ArrivalProcess::kUniform) {
    const auto count =
        static_cast<std::size_t>(std::floor(spec.rps * spec.duration_s + 1e-9));
    for (std::size_t i = 0; i < count; ++i) {
      times.push_back(static_cast<double>(i) * 1e6 / spec.rps);
    }
  } else {
    double t = arrivals.exponential(spec.rps) * 1e6;
    while (t < horizon_us) {
      times.push_back(t);
      t += arrivals.exponential(spec.rps) * 1e6;
    }
  }

  std::optional<PowerLawLengths> power_law;
  if (spec.prompt_len.kind == PromptLengthSpec::Kind::kPowerLaw) {
    power_law.emplace(spec.prompt_len.alpha, spec.prompt_len.min,
                      spec.prompt_len.max);
  }
  std::vector<Request> out(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    Request& r = out[i];
    r.id = i;
    r.arrival_us = times[i];
    r.params = params;
    if (!prompts.empty()) {
      r.prompt = prompts[i % prompts.size()];
      continue;
    }
    const int len = power_law ? power_law->sample(lengths)
                              : spec.prompt_len.fixed;
    r.prompt.resize(static_cast<std::size_t>(len));
    for (int& t : r.prompt) {
      t = static_cast<int>(tokens.below(static_cast<std::uint64_t>(vocab_size)));
    }
  }
  return out;
}

std::vector<std::vector<int>> load_prompts(const std::string& path,
                                           int vocab_size) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open prompt file '" + path + "'");
  std::vector<std::vector<int>> prompts;
  std::string line;
  for (int line_no = 1; std::getline(in, line); ++line_no) {
    std::istringstream fields(line);
    std::vector<int> prompt;
    std::string field;
    while (fields >> field) {
      std::size_t used = 0;
      int token = -1;
      try {
        token = std::stoi(field, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      require(used == field.size() && token >= 0 && token < vocab_size,
              ErrorCode::kInput,
              path + ":" + std::to_string(line_no) + ": bad token '" + field +
                  "'");
      prompt.push_back(token);
    }
    if (!prompt.empty()) {
      prompts.push_back(std::move(prompt));
    }
  }
  return prompts;
}

}  // namespace grserve
