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

#include "medattn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>
#include <unordered_set>

#include "medattn/errors.hpp"
#include "medattn/tensor.hpp"

namespace medattn {

namespace {

// Portable draws: the standard distributions are implementation-defined,
// these are not.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
std::size_t below(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

struct KnownLabel {
  const char* code;
  std::array<const char*, 3> triggers;
};

constexpr KnownLabel kKnown[] = {
    {"I50.9", {"cardiomegaly", "orthopnea", "furosemide"}},
    {"E11.9", {"hyperglycemia", "polyuria", "metformin"}},
    {"N18.3", {"creatinine", "azotemia", "nephropathy"}},
    {"J44.1", {"wheezing", "bronchodilator", "emphysema"}},
    {"I10", {"hypertensive", "lisinopril", "amlodipine"}},
    {"E78.5", {"statin", "atorvastatin", "hyperlipidemia"}},
    {"F32.9", {"anhedonia", "sertraline", "dysthymia"}},
    {"K21.9", {"heartburn", "omeprazole", "reflux"}},
    {"J18.9", {"consolidation", "infiltrate", "ceftriaxone"}},
    {"N39.0", {"dysuria", "pyuria", "nitrofurantoin"}},
    {"I48.91", {"fibrillation", "apixaban", "palpitations"}},
    {"D64.9", {"pallor", "hemoglobin", "transfusion"}},
};

constexpr const char* kSurnames[] = {"Smith", "Jones", "Patel", "Garcia", "Chen", "Okafor", "Novak", "Silva"};

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

}  // namespace

void SynthConfig::validate() const {
  const std::size_t m = n_labels();
  if (m == 0) throw UsageError("synth: at least one label is required");
  if (marginals.size() != m || boosts.size() != m || triggers.size() != m)
    throw UsageError("synth: label codes, marginals, boosts and triggers must all have " +
                     std::to_string(m) + " entries");
  for (double p : marginals)
    if (!(p > 0.0 && p < 1.0)) throw UsageError("synth: marginals must lie in (0, 1)");
  for (std::size_t j = 0; j < m; ++j) {
    if (boosts[j].size() != m) throw UsageError("synth: boosts must be m x m");
    for (std::size_t k = 0; k < m; ++k)
      if (boosts[j][k] != boosts[k][j] || !std::isfinite(boosts[j][k]))
        throw UsageError("synth: boosts must be finite and symmetric");
  }
  if (min_len < 3 || max_len < min_len)
    throw UsageError("synth: length range must satisfy 3 <= min_len <= max_len");
  if (filler_vocab == 0) throw UsageError("synth: filler vocabulary must be nonempty");
  std::set<std::string> seen;
  for (const auto& set : triggers)
    for (const auto& t : set) {
      if (t.empty() || tokenize(t) != std::vector<std::string>{t})
        throw UsageError("synth: trigger '" + t + "' is not a single lowercase token");
      if (!seen.insert(t).second) throw UsageError("synth: trigger '" + t + "' is used twice");
    }
}

SynthConfig default_synth_config(std::size_t n_docs, std::size_t n_labels, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_docs = n_docs;
  cfg.seed = seed;
  constexpr std::size_t known = std::size(kKnown);
  for (std::size_t j = 0; j < n_labels; ++j) {
    if (j < known) {
      cfg.label_codes.emplace_back(kKnown[j].code);
      cfg.triggers.push_back({kKnown[j].triggers[0], kKnown[j].triggers[1], kKnown[j].triggers[2]});
    } else {
      cfg.label_codes.push_back("R" + std::to_string(10 + j) + "." + std::to_string(j % 10));
      const std::string stem = "marker" + std::to_string(j);
      cfg.triggers.push_back({stem + "a", stem + "b", stem + "c"});
    }
    cfg.marginals.push_back(0.2 + 0.05 * static_cast<double>(j % 4));
  }
  cfg.boosts.assign(n_labels, std::vector<double>(n_labels, 0.0));
  for (std::size_t j = 0; j + 1 < n_labels; j += 2) cfg.boosts[j][j + 1] = cfg.boosts[j + 1][j] = 1.0;
  return cfg;
}

std::vector<std::string> filler_words(const SynthConfig& cfg) {
  static constexpr char kConsonants[] = "bdfgklmnprstvz";
  static constexpr char kVowels[] = "aeiou";
  std::unordered_set<std::string> reserved;
  for (const auto& set : cfg.triggers) reserved.insert(set.begin(), set.end());
  // Fixed seed: the filler lexicon does not change with the corpus seed.
  std::mt19937_64 rng(0x6d656461ull);
  std::vector<std::string> words;
  std::unordered_set<std::string> seen;
  while (words.size() < cfg.filler_vocab) {
    const std::size_t syllables = 2 + below(rng, 2);
    std::string w;
    for (std::size_t s = 0; s < syllables; ++s) {
      w += kConsonants[below(rng, sizeof kConsonants - 1)];
      w += kVowels[below(rng, sizeof kVowels - 1)];
    }
    if (reserved.count(w) || !seen.insert(w).second) continue;
    words.push_back(std::move(w));
  }
  return words;
}

std::vector<std::vector<std::uint8_t>> sample_label_sets(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t m = cfg.n_labels();
  std::vector<double> base(m);
  for (std::size_t j = 0; j < m; ++j) base[j] = std::log(cfg.marginals[j] / (1.0 - cfg.marginals[j]));
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::vector<std::uint8_t>> out(cfg.n_docs, std::vector<std::uint8_t>(m, 0));
  for (auto& y : out) {
    for (std::size_t j = 0; j < m; ++j) y[j] = unit(rng) < cfg.marginals[j] ? 1 : 0;
    for (int sweep = 0; sweep < 10; ++sweep)
      for (std::size_t j = 0; j < m; ++j) {
        double z = base[j];
        for (std::size_t k = 0; k < m; ++k)
          if (k != j && y[k]) z += cfg.boosts[j][k];
        y[j] = unit(rng) < sigmoid(z) ? 1 : 0;
      }
  }
  return out;
}

std::vector<RawRecord> generate_corpus(const SynthConfig& cfg) {
  const auto label_sets = sample_label_sets(cfg);
  const auto filler = filler_words(cfg);
  const std::size_t m = cfg.n_labels();
  // Separate stream so label sampling does not depend on text choices.
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<RawRecord> out;
  out.reserve(cfg.n_docs);
  for (std::size_t d = 0; d < cfg.n_docs; ++d) {
    const std::size_t len = cfg.min_len + below(rng, cfg.max_len - cfg.min_len + 1);
    std::vector<std::string> words;
    words.reserve(len + 2 * m);
    for (std::size_t i = 0; i < len; ++i) words.push_back(filler[below(rng, filler.size())]);

    RawRecord rec;
    for (std::size_t j = 0; j < m; ++j) {
      if (!label_sets[d][j]) continue;
      rec.labels.push_back(cfg.label_codes[j]);
      const std::size_t count = 1 + below(rng, 2);
      std::array<std::size_t, 3> order{0, 1, 2};
      for (std::size_t i = 0; i < count; ++i) {
        std::swap(order[i], order[i + below(rng, 3 - i)]);
        const std::size_t pos = below(rng, words.size() + 1);
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), cfg.triggers[j][order[i]]);
      }
    }

    char date[32];
    std::snprintf(date, sizeof date, "%02d/%02d/20%02d", static_cast<int>(1 + below(rng, 12)),
                  static_cast<int>(1 + below(rng, 28)), static_cast<int>(10 + below(rng, 15)));
    std::string text = "Admitted on " + std::string(date) + ".";
    if (below(rng, 2) == 0) text += " MRN " + std::to_string(1000000 + below(rng, 9000000)) + ".";
    text += "\n";
    for (std::size_t i = 0; i < words.size();) {
      const std::size_t n = std::min(words.size() - i, 5 + below(rng, 6));
      std::string sentence = capitalize(words[i]);
      for (std::size_t k = 1; k < n; ++k) sentence += " " + words[i + k];
      text += sentence + ". ";
      i += n;
    }
    text += "Seen by Dr. " + std::string(kSurnames[below(rng, std::size(kSurnames))]) + ".";

    char id[32];
    std::snprintf(id, sizeof id, "note-%06zu", d);
    rec.id = id;
    rec.text = std::move(text);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<std::uint8_t> planted_labels(const SynthConfig& cfg, const std::string& text) {
  const auto tokens = note_tokens(text);
  const std::unordered_set<std::string> present(tokens.begin(), tokens.end());
  std::vector<std::uint8_t> out(cfg.n_labels(), 0);
  for (std::size_t j = 0; j < cfg.n_labels(); ++j)
    for (const auto& t : cfg.triggers[j])
      if (present.count(t)) out[j] = 1;
  return out;
}

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::remove: return "delete";
    case NoiseKind::substitute: return "substitute";
    case NoiseKind::typo: return "typo";
  }
  return "?";
}

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "delete") return NoiseKind::remove;
  if (name == "substitute") return NoiseKind::substitute;
  if (name == "typo") return NoiseKind::typo;
  throw UsageError("unknown noise kind '" + name + "' (expected delete, substitute or typo)");
}

std::vector<std::string> inject_noise(const std::vector<std::string>& tokens, double level,
                                      NoiseKind kind, std::uint64_t seed,
                                      const std::vector<std::string>& vocabulary) {
  if (!(level >= 0.0 && level <= 1.0)) throw UsageError("inject_noise: level must lie in [0, 1]");
  const std::size_t n = tokens.size();
  const auto k = static_cast<std::size_t>(std::lround(level * static_cast<double>(n)));
  if (k == 0) return tokens;
  if (kind == NoiseKind::substitute && vocabulary.empty())
    throw UsageError("inject_noise: substitution needs a nonempty vocabulary");

  // Each selected position draws its payload right after it is chosen, so
  // for one seed the perturbations at a lower level are a prefix of those at
  // a higher level.
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<std::pair<std::size_t, std::uint64_t>> chosen;
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(idx[i], idx[i + below(rng, n - i)]);
    chosen.emplace_back(idx[i], rng());
  }

  std::vector<std::string> out = tokens;
  switch (kind) {
    case NoiseKind::remove: {
      if (chosen.size() >= n) chosen.pop_back();
      std::vector<std::uint8_t> drop(n, 0);
      for (const auto& c : chosen) drop[c.first] = 1;
      out.clear();
      for (std::size_t i = 0; i < n; ++i)
        if (!drop[i]) out.push_back(tokens[i]);
      break;
    }
    case NoiseKind::substitute:
      for (const auto& [p, payload] : chosen) out[p] = vocabulary[payload % vocabulary.size()];
      break;
    case NoiseKind::typo:
      for (const auto& [p, payload] : chosen) {
        std::string& t = out[p];
        if (t.size() <= 1) {
          t = std::string(1, static_cast<char>('a' + payload % 26));
        } else {
          const std::size_t i = payload % (t.size() - 1);
          std::swap(t[i], t[i + 1]);
        }
      }
      break;
  }
  return out;
}

}  // namespace medattn
