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

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "beam/beam_pool.h"
#include "beam/beam_search.h"
#include "common/errors.h"
#include "common/rng.h"
#include "model/ops.h"

using namespace grserve;

namespace {

std::vector<int> as_vector(std::span<const int> s) {
  return std::vector<int>(s.begin(), s.end());
}

// Fresh-allocation reference for one commit: new beam i = parent prefix +
// token, in the pool's slot order.
struct NaiveBeams {
  std::vector<std::vector<int>> tokens{{}};
  std::vector<double> scores{0.0};

  void commit(std::span<const Candidate> selected, const ReorderPlan& plan) {
    std::vector<std::vector<int>> t;
    std::vector<double> s;
    for (std::size_t i = 0; i < plan.size(); ++i) {
      const Candidate& c = selected[plan.perm[i]];
      auto seq = tokens.at(c.beam);
      seq.push_back(c.token);
      t.push_back(seq);
      s.push_back(c.score);
    }
    tokens = std::move(t);
    scores = std::move(s);
  }
};

std::vector<float> random_rows(Rng& rng, int rows, int vocab) {
  std::vector<float> out(static_cast<std::size_t>(rows) * vocab);
  for (auto& v : out) {
    v = rng.uniform_float(-4.0f, 4.0f);
  }
  return out;
}

}  // namespace

TEST_CASE("self-continuing beams keep their slots") {
  BeamPool pool(3, 2);
  std::vector<Candidate> first{{0, 5, -1.0}, {0, 6, -2.0}, {0, 7, -3.0}};
  pool.commit_step(first, 0);
  std::vector<Candidate> second{{0, 1, -1.5}, {1, 2, -2.5}, {2, 3, -3.5}};
  const auto& plan = pool.commit_step(second, 1);
  CHECK(plan.is_identity());
  CHECK(as_vector(pool.tokens(0)) == std::vector<int>{5, 1});
  CHECK(as_vector(pool.tokens(1)) == std::vector<int>{6, 2});
  CHECK(as_vector(pool.tokens(2)) == std::vector<int>{7, 3});
  CHECK(as_vector(pool.tips()) == std::vector<int>{1, 2, 3});
  CHECK(pool.step_log_probs(1)[1] == doctest::Approx(-0.5));
}

TEST_CASE("all beams forking from beam 0 share its prefix") {
  const int bw = 6;
  BeamPool pool(bw, 3);
  NaiveBeams naive;
  std::vector<Candidate> first;
  for (int b = 0; b < bw; ++b) {
    first.push_back({0, 10 + b, -0.1 * b});
  }
  naive.commit(first, pool.commit_step(first, 0));
  std::vector<Candidate> second;
  for (int b = 0; b < bw; ++b) {
    second.push_back({0, 20 + b, -1.0 - b});
  }
  const auto& plan = pool.commit_step(second, 1);
  naive.commit(second, plan);
  for (int b = 0; b < bw; ++b) {
    CHECK(as_vector(pool.tokens(b)) == naive.tokens[b]);
    CHECK(pool.tokens(b)[0] == 10);
    CHECK(pool.score(b) == naive.scores[b]);
  }
}

TEST_CASE("random commits match the fresh-allocation reference") {
  Rng rng(8);
  const int bw = 16;
  BeamPool pool(bw, 4);
  for (int trial = 0; trial < 20; ++trial) {
    pool.reset();
    NaiveBeams naive;
    for (int step = 0; step < 4; ++step) {
      std::vector<Candidate> sel;
      const int n = 1 + static_cast<int>(rng.below(bw));
      for (int i = 0; i < n; ++i) {
        const int beam = static_cast<int>(rng.below(pool.live()));
        sel.push_back({beam, static_cast<int>(rng.below(100)),
                       pool.score(beam) - rng.uniform01()});
      }
      naive.commit(sel, pool.commit_step(sel, step));
      REQUIRE(pool.live() == n);
      for (int b = 0; b < n; ++b) {
        CHECK(as_vector(pool.tokens(b)) == naive.tokens[b]);
        CHECK(pool.score(b) == naive.scores[b]);
        const auto lp = pool.step_log_probs(b);
        CHECK(std::accumulate(lp.begin(), lp.end(), 0.0) ==
              doctest::Approx(pool.score(b)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("commit_step state errors") {
  BeamPool pool(4, 2);
  std::vector<Candidate> bad_beam{{1, 0, 0.0}};
  auto code_of = [&](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kIo;
  };
  CHECK(code_of([&] { pool.commit_step(bad_beam, 0); }) == ErrorCode::kState);
  std::vector<Candidate> ok{{0, 1, -1.0}, {0, 2, -2.0}};
  CHECK(code_of([&] { pool.commit_step(ok, 1); }) == ErrorCode::kState);
  pool.commit_step(ok, 0);
  CHECK(code_of([&] { pool.final_items(); }) == ErrorCode::kState);
  std::vector<Candidate> too_far{{2, 1, -1.0}};
  CHECK(code_of([&] { pool.commit_step(too_far, 1); }) == ErrorCode::kState);
  std::vector<Candidate> next{{1, 3, -2.5}};
  pool.commit_step(next, 1);
  CHECK(code_of([&] { pool.commit_step(next, 2); }) == ErrorCode::kState);
  const auto items = pool.final_items();
  REQUIRE(items.size() == 1);
  CHECK(items[0].tokens == std::vector<int>{2, 3});
}

TEST_CASE("beam search at BW 512 does not allocate after the first request") {
  const int bw = 512;
  const int vocab = 1024;
  const auto vocab_items = random_vocabulary(3, vocab, 200000, 3);
  BeamConfig cfg;
  cfg.beam_width = bw;
  cfg.top_k = 32;
  cfg.decode_steps = 3;
  BeamSearch search(cfg, &vocab_items, vocab);
  Rng rng(1);
  std::vector<std::vector<float>> rows;
  rows.push_back(random_rows(rng, 1, vocab));
  for (int step = 1; step < 3; ++step) {
    rows.push_back(random_rows(rng, bw, vocab));
  }
  auto run = [&] {
    search.reset();
    for (int level = 0; level < 3; ++level) {
      std::vector<float>& src = rows[level];
      // Copy into a buffer that outlives the measurement window.
      static std::vector<float> buf;
      buf.assign(src.begin(), src.end());
      const std::size_t n =
          static_cast<std::size_t>(level == 0 ? 1 : search.live()) * vocab;
      search.prepare_masks();
      search.select(std::span<float>(buf.data(), n));
    }
  };
  run();
  const auto before = AllocationCounter::count();
  run();
  CHECK(AllocationCounter::count() == before);
  CHECK(search.pool().beam_width() == bw);
  CHECK(search.live() == bw);
}

TEST_CASE("single-item vocabulary yields that item with additive score") {
  const std::vector<int> items{3, 1, 2};
  const auto v = ItemVocabulary::build(items, 3, 8);
  BeamConfig cfg;
  cfg.beam_width = 1;
  cfg.top_k = 1;
  BeamSearch search(cfg, &v, 8);
  Rng rng(12);
  double expected = 0.0;
  for (int level = 0; level < 3; ++level) {
    auto row = random_rows(rng, 1, 8);
    std::vector<float> masked = row;
    MaskBuffer buf(8);
    buf.allow(items[level]);
    apply_mask(masked, buf);
    expected += ops::log_softmax(masked)[items[level]];
    search.select(row);
  }
  const auto out = search.final_items();
  REQUIRE(out.size() == 1);
  CHECK(out[0].tokens == items);
  CHECK(std::abs(out[0].score - expected) <= 1e-6);
  CHECK(expected == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("level 0 picks distinct tokens from the prefill row") {
  BeamConfig cfg;
  cfg.beam_width = 4;
  cfg.top_k = 2;
  cfg.masking = false;
  BeamSearch search(cfg, nullptr, 16);
  std::vector<float> row(16, 0.0f);
  row[3] = 2.0f;
  row[9] = 1.0f;
  search.select(row);
  CHECK(search.live() == 4);
  CHECK(as_vector(search.tips()) == std::vector<int>{3, 9, 0, 1});
}

TEST_CASE("beam width above the vocabulary fills from level 1") {
  BeamConfig cfg;
  cfg.beam_width = 12;
  cfg.top_k = 4;
  cfg.decode_steps = 2;
  cfg.masking = false;
  BeamSearch search(cfg, nullptr, 8);
  Rng rng(4);
  auto first = random_rows(rng, 1, 8);
  search.select(first);
  CHECK(search.live() == 8);
  auto tips = as_vector(search.tips());
  std::sort(tips.begin(), tips.end());
  CHECK(tips == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
  auto second = random_rows(rng, search.live(), 8);
  search.select(second);
  CHECK(search.live() == 12);
  CHECK(search.final_items().size() == 12);
}

TEST_CASE("masked search emits only vocabulary items") {
  Rng rng(21);
  for (double density : {1e-9, 0.01, 0.5, 1.0}) {
    const auto v = planted_vocabulary(3, 16, density, 5);
    BeamConfig cfg;
    cfg.beam_width = 8;
    cfg.top_k = 4;
    BeamSearch search(cfg, &v, 16);
    for (int request = 0; request < 20; ++request) {
      search.reset();
      for (int level = 0; level < 3; ++level) {
        auto rows = random_rows(rng, level == 0 ? 1 : search.live(), 16);
        search.select(rows);
      }
      for (const auto& item : search.final_items()) {
        CHECK(v.contains(item.tokens));
      }
    }
  }
}

TEST_CASE("beam config json") {
  BeamConfig c;
  c.beam_width = 16;
  c.masking = false;
  const nlohmann::json j = c;
  CHECK(j.get<BeamConfig>() == c);
  nlohmann::json bad = j;
  bad["extra"] = 1;
  CHECK_THROWS_AS(bad.get<BeamConfig>(), Error);
  BeamConfig wide;
  wide.beam_width = 300;
  CHECK_NOTHROW(wide.validate(256));
  wide.top_k = 300;
  CHECK_THROWS_AS(wide.validate(256), Error);
}
