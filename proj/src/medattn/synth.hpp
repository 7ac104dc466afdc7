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

// Synthetic notes with a planted signal: every label owns three trigger
// words, and a note carries label j exactly when one of j's triggers occurs
// in it. Label sets are drawn with pairwise co-occurrence.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "medattn/text_pipeline.hpp"

namespace medattn {

struct SynthConfig {
  std::size_t n_docs = 2000;
  std::vector<std::string> label_codes;          // raw codes, one per label
  std::vector<double> marginals;                 // per label, in (0, 1)
  std::vector<std::vector<double>> boosts;       // m x m symmetric, zero diagonal
  std::vector<std::array<std::string, 3>> triggers;
  std::size_t filler_vocab = 300;
  std::size_t min_len = 10;  // filler tokens per note
  std::size_t max_len = 25;
  std::uint64_t seed = 42;

  std::size_t n_labels() const noexcept { return label_codes.size(); }
  /// Throws UsageError when an invariant does not hold.
  void validate() const;
};

/// Reference configuration for m labels: marginals 0.2..0.35, a chain of
/// positive co-occurrence boosts between neighbouring labels, and
/// deterministic trigger words.
SynthConfig default_synth_config(std::size_t n_docs = 2000, std::size_t n_labels = 8,
                                 std::uint64_t seed = 42);

/// Filler words for a config, disjoint from every trigger.
std::vector<std::string> filler_words(const SynthConfig& cfg);

/// Label vectors by Gibbs sampling, 10 sweeps per document, from the
/// conditional logit(marginal_j) + sum_k boosts[j][k] * y_k.
std::vector<std::vector<std::uint8_t>> sample_label_sets(const SynthConfig& cfg);

std::vector<RawRecord> generate_corpus(const SynthConfig& cfg);

/// 0/1 per label: whether one of its triggers occurs among the note tokens.
std::vector<std::uint8_t> planted_labels(const SynthConfig& cfg, const std::string& text);

enum class NoiseKind { remove, substitute, typo };

std::string to_string(NoiseKind kind);
/// "delete" | "substitute" | "typo"
NoiseKind parse_noise_kind(const std::string& name);

/// Perturbs exactly round(level * n) distinct positions chosen without
/// replacement. `vocabulary` supplies substitutes. Deletion always leaves at
/// least one token.
std::vector<std::string> inject_noise(const std::vector<std::string>& tokens, double level,
                                      NoiseKind kind, std::uint64_t seed,
                                      const std::vector<std::string>& vocabulary);

}  // namespace medattn
