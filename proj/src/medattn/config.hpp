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

// Application configuration.
//
// File format: one `key = value` per line. Blank lines and lines whose first
// non-blank character is `#` are ignored; a ` #` after a value starts a
// comment. Keys are dotted (`train.learning_rate`). Lists are
// comma-separated (`sweep.rates = 1e-5, 1e-4, 1e-3`). A key may appear once.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "medattn/experiments.hpp"

namespace medattn {

struct AppConfig {
  ModelConfig model;  // model.max_len also sets the encoding length
  TrainConfig train;
  std::size_t synth_docs = 2000;
  std::size_t synth_labels = 8;
  std::uint64_t synth_seed = 42;
  std::size_t synth_filler_vocab = 300;
  std::size_t synth_min_len = 10;
  std::size_t synth_max_len = 25;
  PreprocessSettings preprocess;  // max_len is ignored; model.max_len applies
  double test_fraction = 0.2;
  std::uint64_t split_seed = 42;
  std::vector<double> sweep_rates = kDefaultRates;
  std::vector<double> sweep_fractions = kDefaultFractions;
  std::vector<double> sweep_levels = kDefaultNoiseLevels;
  NoiseKind noise_kind = NoiseKind::substitute;
  std::uint64_t noise_seed = 7;

  SynthConfig synth_config() const;
  PreprocessSettings preprocess_settings() const;
  ExperimentConfig experiment_config() const;
};

using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

/// Applies `text` (file contents) then `overrides` on top of the defaults.
/// Throws UsageError for malformed lines, unknown keys (naming the nearest
/// valid key), repeated keys and values of the wrong type.
AppConfig parse_config(const std::string& text, const ConfigOverrides& overrides = {});
/// Empty path means defaults plus overrides.
AppConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

/// `key = value` for every key, in documentation order.
std::string render_config(const AppConfig& config);
/// Current value of one key as it would be rendered; UsageError if unknown.
std::string config_value(const AppConfig& config, const std::string& key);
/// Every key with its default and a short description, for --help.
std::string config_reference();
std::vector<std::string> config_keys();

/// Levenshtein distance.
std::size_t edit_distance(const std::string& a, const std::string& b);

}  // namespace medattn
