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

#include "model/weights.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>

#include <json.hpp>

#include "common/errors.h"
#include "common/rng.h"

namespace grserve {
namespace {

void fill_uniform(Rng& rng, std::vector<float>& w, std::size_t n, float bound) {
  w.resize(n);
  for (auto& x : w) {
    x = rng.uniform_float(-bound, bound);
  }
}

// Visits every tensor in serialization order.
void for_each_tensor(
    Weights& w,
    const std::function<void(const std::string&, std::vector<float>&,
                             std::vector<int>)>& fn) {
  const auto& c = w.config;
  const int h = c.hidden();
  fn("embedding", w.embedding, {c.vocab_size, h});
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    auto& lw = w.layers[l];
    const std::string p = "layers." + std::to_string(l) + ".";
    fn(p + "attn_norm", lw.attn_norm, {h});
    fn(p + "wq", lw.wq, {h, h});
    fn(p + "wk", lw.wk, {h, h});
    fn(p + "wv", lw.wv, {h, h});
    fn(p + "wo", lw.wo, {h, h});
    fn(p + "mlp_norm", lw.mlp_norm, {h});
    fn(p + "w_up", lw.w_up, {h, c.ffn()});
    fn(p + "w_down", lw.w_down, {c.ffn(), h});
  }
  fn("final_norm", w.final_norm, {h});
  fn("lm_head", w.lm_head, {h, c.vocab_size});
}

std::uint32_t to_le(std::uint32_t x) {
  if constexpr (std::endian::native == std::endian::big) {
    return __builtin_bswap32(x);
  }
  return x;
}

}  // namespace

std::uint64_t Weights::checksum() const {
  std::uint64_t hash = 1469598103934665603ull;
  auto& self = const_cast<Weights&>(*this);
  for_each_tensor(self, [&](const std::string&, std::vector<float>& t,
                            std::vector<int>) {
    for (float x : t) {
      const std::uint32_t bits = to_le(std::bit_cast<std::uint32_t>(x));
      for (int b = 0; b < 4; ++b) {
        hash ^= (bits >> (8 * b)) & 0xffu;
        hash *= 1099511628211ull;
      }
    }
  });
  return hash;
}

Weights init_weights(const ModelConfig& config) {
  config.validate();
  Weights w;
  w.config = config;
  Rng rng(config.seed);
  const int h = config.hidden();
  const float in_bound = 1.0f / std::sqrt(static_cast<float>(h));
  const float ffn_bound = 1.0f / std::sqrt(static_cast<float>(config.ffn()));

  fill_uniform(rng, w.embedding,
               static_cast<std::size_t>(config.vocab_size) * h, 1.0f);
  w.layers.resize(config.layers);
  for (auto& lw : w.layers) {
    lw.attn_norm.assign(h, 1.0f);
    lw.mlp_norm.assign(h, 1.0f);
    fill_uniform(rng, lw.wq, static_cast<std::size_t>(h) * h, in_bound);
    fill_uniform(rng, lw.wk, static_cast<std::size_t>(h) * h, in_bound);
    fill_uniform(rng, lw.wv, static_cast<std::size_t>(h) * h, in_bound);
    fill_uniform(rng, lw.wo, static_cast<std::size_t>(h) * h, in_bound);
    fill_uniform(rng, lw.w_up, static_cast<std::size_t>(h) * config.ffn(),
                 in_bound);
    fill_uniform(rng, lw.w_down, static_cast<std::size_t>(config.ffn()) * h,
                 ffn_bound);
  }
  w.final_norm.assign(h, 1.0f);
  // Scaled up so next-token distributions are peaked rather than flat.
  fill_uniform(rng, w.lm_head, static_cast<std::size_t>(h) * config.vocab_size,
               4.0f * in_bound);
  return w;
}

void save_weights(const Weights& weights, const std::string& prefix) {
  std::ofstream bin(prefix + ".bin", std::ios::binary);
  require(bin.good(), ErrorCode::kIo, "cannot write " + prefix + ".bin");
  nlohmann::json tensors = nlohmann::json::array();
  std::size_t offset = 0;
  auto& self = const_cast<Weights&>(weights);
  for_each_tensor(self, [&](const std::string& name, std::vector<float>& t,
                            std::vector<int> shape) {
    for (float x : t) {
      const std::uint32_t bits = to_le(std::bit_cast<std::uint32_t>(x));
      bin.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
    tensors.push_back({{"name", name}, {"shape", shape}, {"offset", offset}});
    offset += t.size();
  });
  require(bin.good(), ErrorCode::kIo, "failed writing " + prefix + ".bin");
  std::ofstream manifest(prefix + ".json");
  require(manifest.good(), ErrorCode::kIo, "cannot write " + prefix + ".json");
  manifest << nlohmann::json{{"config", weights.config},
                             {"dtype", "float32-le"},
                             {"tensors", tensors}}
                  .dump(2)
           << "\n";
}

Weights load_weights(const std::string& prefix) {
  std::ifstream manifest_in(prefix + ".json");
  require(manifest_in.good(), ErrorCode::kIo, "cannot read " + prefix + ".json");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(manifest_in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInput, std::string("bad weight manifest: ") + e.what());
  }
  Weights w;
  w.config = manifest.at("config").get<ModelConfig>();
  w.config.validate();
  w.layers.resize(w.config.layers);

  std::ifstream bin(prefix + ".bin", std::ios::binary);
  require(bin.good(), ErrorCode::kIo, "cannot read " + prefix + ".bin");
  const auto& tensors = manifest.at("tensors");
  std::size_t index = 0;
  std::size_t offset = 0;
  for_each_tensor(w, [&](const std::string& name, std::vector<float>& t,
                         std::vector<int> shape) {
    require(index < tensors.size(), ErrorCode::kInput,
            "manifest is missing tensor " + name);
    const auto& entry = tensors.at(index++);
    require(entry.at("name") == name &&
                entry.at("shape").get<std::vector<int>>() == shape &&
                entry.at("offset").get<std::size_t>() == offset,
            ErrorCode::kInput, "manifest entry mismatch for " + name);
    std::size_t n = 1;
    for (int d : shape) {
      n *= static_cast<std::size_t>(d);
    }
    t.resize(n);
    for (auto& x : t) {
      std::uint32_t bits = 0;
      bin.read(reinterpret_cast<char*>(&bits), sizeof(bits));
      x = std::bit_cast<float>(to_le(bits));
    }
    require(bin.good(), ErrorCode::kInput, "weight file truncated at " + name);
    offset += n;
  });
  return w;
}

}  // namespace grserve
