// Copyright 2026 The medattn Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "medattn/errors.hpp"
#include "medattn/synth.hpp"
#include "medattn/text_pipeline.hpp"

using namespace medattn;
using Strings = std::vector<std::string>;

namespace {

Strings numbered_tokens(std::size_t n) {
  Strings out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("tok" + std::to_string(i));
  return out;
}

std::size_t positions_changed(const Strings& a, const Strings& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += a[i] != b[i];
  return n;
}

}  // namespace

TEST_CASE("config validation") {
  SynthConfig cfg = default_synth_config(10, 4, 1);
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.n_labels() == 4);

  SynthConfig bad = cfg;
  bad.marginals[0] = 1.0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = cfg;
  bad.triggers[1][0] = bad.triggers[0][0];
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = cfg;
  bad.boosts[0][1] = 0.5;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = cfg;
  bad.min_len = 2;
  CHECK_THROWS_AS(bad.validate(), UsageError);

  const auto filler = filler_words(cfg);
  CHECK(filler.size() == cfg.filler_vocab);
  std::set<std::string> trig;
  for (const auto& t : cfg.triggers) trig.insert(t.begin(), t.end());
  CHECK(trig.size() == 3 * cfg.n_labels());
  for (const auto& w : filler) CHECK(trig.count(w) == 0);
}

TEST_CASE("planted rule holds for every document") {
  const SynthConfig cfg = default_synth_config(500, 8, 42);
  const auto corpus = generate_corpus(cfg);
  REQUIRE(corpus.size() == 500);
  for (const auto& r : corpus) {
    const auto planted = planted_labels(cfg, r.text);
    std::vector<std::uint8_t> assigned(cfg.n_labels(), 0);
    for (const auto& code : r.labels) {
      const auto it = std::find(cfg.label_codes.begin(), cfg.label_codes.end(), code);
      REQUIRE(it != cfg.label_codes.end());
      assigned[static_cast<std::size_t>(it - cfg.label_codes.begin())] = 1;
    }
    CHECK(planted == assigned);
    // The rule survives the text pipeline as well.
    const auto tokens = note_tokens(r.text);
    for (std::size_t j = 0; j < cfg.n_labels(); ++j) {
      bool seen = false;
      for (const auto& t : cfg.triggers[j]) seen = seen || std::find(tokens.begin(), tokens.end(), t) != tokens.end();
      CHECK(seen == static_cast<bool>(assigned[j]));
    }
  }
}

TEST_CASE("generation is deterministic per seed") {
  const auto a = generate_corpus(default_synth_config(100, 5, 7));
  const auto b = generate_corpus(default_synth_config(100, 5, 7));
  const auto c = generate_corpus(default_synth_config(100, 5, 8));
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("marginals without boosts") {
  SynthConfig cfg = default_synth_config(5000, 3, 11);
  for (auto& row : cfg.boosts) std::fill(row.begin(), row.end(), 0.0);
  cfg.marginals = {0.3, 0.3, 0.3};
  const auto sets = sample_label_sets(cfg);
  REQUIRE(sets.size() == 5000);
  for (std::size_t j = 0; j < 3; ++j) {
    double n = 0;
    for (const auto& s : sets) n += s[j];
    CHECK(std::abs(n / 5000.0 - 0.3) <= 0.03);
  }
}

TEST_CASE("boosts raise co-occurrence") {
  SynthConfig cfg = default_synth_config(4000, 2, 5);
  cfg.marginals = {0.3, 0.3};
  cfg.boosts = {{0.0, 2.0}, {2.0, 0.0}};
  const auto sets = sample_label_sets(cfg);
  double both = 0, first = 0, second = 0;
  for (const auto& s : sets) {
    both += s[0] && s[1];
    first += s[0];
    second += s[1];
  }
  const double n = static_cast<double>(sets.size());
  CHECK(both / n > (first / n) * (second / n) + 0.05);
}

TEST_CASE("inject_noise") {
  const Strings tokens = numbered_tokens(10);
  const Strings vocab = {"alpha", "beta", "gamma"};

  for (auto kind : {NoiseKind::remove, NoiseKind::substitute, NoiseKind::typo}) {
    CHECK(inject_noise(tokens, 0.0, kind, 3, vocab) == tokens);
    CHECK(inject_noise(tokens, 0.5, kind, 3, vocab) == inject_noise(tokens, 0.5, kind, 3, vocab));
  }

  CHECK(inject_noise(tokens, 0.5, NoiseKind::remove, 3, vocab).size() == 5);
  CHECK(inject_noise(tokens, 1.0, NoiseKind::remove, 3, vocab).size() == 1);
  CHECK(positions_changed(tokens, inject_noise(tokens, 0.5, NoiseKind::substitute, 3, {"zzz"})) == 5);
  CHECK(positions_changed(tokens, inject_noise(tokens, 0.5, NoiseKind::typo, 3, vocab)) == 5);

  SUBCASE("round(level * n) positions for many lengths") {
    for (std::size_t n = 1; n <= 40; ++n) {
      const Strings t = numbered_tokens(n);
      for (double level : {0.05, 0.1, 0.15, 0.2, 0.33, 0.5}) {
        const auto k = static_cast<std::size_t>(std::lround(level * static_cast<double>(n)));
        CHECK(positions_changed(t, inject_noise(t, level, NoiseKind::substitute, n, {"zzz"})) == k);
        CHECK(inject_noise(t, level, NoiseKind::remove, n, vocab).size() == std::max<std::size_t>(1, n - k));
      }
    }
  }

  SUBCASE("typos swap adjacent characters") {
    const Strings words = {"abcd", "x", "ab"};
    const auto out = inject_noise(words, 1.0, NoiseKind::typo, 9, vocab);
    std::string a0 = words[0], b0 = out[0];
    std::sort(a0.begin(), a0.end());
    std::sort(b0.begin(), b0.end());
    CHECK(a0 == b0);
    CHECK(out[0] != "abcd");
    CHECK(out[1].size() == 1);
    CHECK(out[1] != "x");
    CHECK(out[2] == "ba");
  }

  SUBCASE("perturbed positions are nested across levels") {
    const Strings t = numbered_tokens(40);
    const auto low = inject_noise(t, 0.1, NoiseKind::substitute, 21, vocab);
    const auto high = inject_noise(t, 0.2, NoiseKind::substitute, 21, vocab);
    for (std::size_t i = 0; i < t.size(); ++i)
      if (low[i] != t[i]) CHECK(high[i] == low[i]);
  }

  CHECK_THROWS_AS(inject_noise(tokens, 1.5, NoiseKind::remove, 1, vocab), UsageError);
  CHECK(parse_noise_kind("delete") == NoiseKind::remove);
  CHECK(to_string(NoiseKind::typo) == "typo");
  CHECK_THROWS_AS(parse_noise_kind("shuffle"), UsageError);
}
