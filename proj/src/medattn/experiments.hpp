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

// Sensitivity sweeps (learning rate, training-set size, input noise) and the
// bag-of-words comparison, all on one fixed train/validation/test split.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "medattn/metrics.hpp"
#include "medattn/synth.hpp"
#include "medattn/training.hpp"

namespace medattn {

struct ExperimentConfig {
  ModelConfig model;  // vocab_size, n_labels and max_len come from the corpus
  TrainConfig train;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 42;
  std::uint64_t noise_seed = 7;
};

/// Index lists into corpus.entries. `train_order` is a seeded permutation of
/// the training pool; sample-size sweeps take prefixes of it.
struct ExperimentData {
  PreprocessedCorpus corpus;
  std::vector<std::size_t> train_order;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;

  std::vector<EncodedExample> examples(std::span<const std::size_t> indices) const;
};

ExperimentData prepare_experiment(PreprocessedCorpus corpus, double test_fraction,
                                  std::uint64_t seed);

/// cfg.model with the corpus-derived sizes filled in.
ModelConfig experiment_model(const ExperimentConfig& cfg, const ExperimentData& data);

struct SweepResult {
  std::string sweep;
  double value = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double train_seconds = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const SweepResult&, const SweepResult&) = default;
};

inline const std::vector<double> kDefaultRates = {1e-5, 1e-4, 1e-3};
inline const std::vector<double> kDefaultFractions = {0.1, 0.2, 0.3, 0.4, 0.5,
                                                      0.6, 0.7, 0.8, 0.9, 1.0};
inline const std::vector<double> kDefaultNoiseLevels = {0.0, 0.05, 0.10, 0.15, 0.20};

struct TrainedTransformer {
  TrainResult result;
  double train_seconds = 0.0;

  TransformerClassifier model() const { return {result.best.model, result.best.params}; }
};

/// Trains a fresh transformer on the given training indices with the fixed
/// validation set.
TrainedTransformer train_transformer(const ExperimentData& data, const ExperimentConfig& cfg,
                                     std::span<const std::size_t> train_indices);

MetricsReport evaluate_model(const TrainableModel& model, std::span<const EncodedExample> examples,
                             double threshold);

std::vector<SweepResult> lr_sweep(std::vector<double> rates, const ExperimentData& data,
                                  const ExperimentConfig& cfg);

/// Throws UsageError for a fraction outside (0, 1] or one that leaves fewer
/// than two batches of training examples.
std::vector<SweepResult> sample_fraction_sweep(std::vector<double> fractions,
                                               const ExperimentData& data,
                                               const ExperimentConfig& cfg);

/// Trains once on clean data and evaluates on the test notes perturbed at
/// each level. Every row carries the one training time.
std::vector<SweepResult> noise_sweep(std::vector<double> levels, NoiseKind kind,
                                     const ExperimentData& data, const ExperimentConfig& cfg);

/// Test examples re-encoded after perturbing their tokens. Example i uses a
/// seed derived from `seed` and i only.
std::vector<EncodedExample> perturbed_test_set(const ExperimentData& data, double level,
                                               NoiseKind kind, std::uint64_t seed);

/// Per-label logistic regression on binary bag-of-words features.
class BowClassifier final : public TrainableModel {
 public:
  BowClassifier(std::size_t vocab_size, std::size_t n_labels);

  std::vector<Tensor*> parameters() override { return {&weights_, &bias_}; }
  std::vector<std::string> parameter_names() const override { return {"bow.w", "bow.b"}; }
  double loss_and_gradient(const EncodedExample& example, double eps_clamp,
                           std::vector<Tensor>& grads) const override;
  std::vector<double> predict(const EncodedExample& example) const override;

 private:
  std::vector<double> logits(const EncodedExample& example, std::vector<std::int32_t>& present) const;
  Tensor weights_;  // [V x m]
  Tensor bias_;     // [m]
};

/// Trains BowClassifier with cfg.train on the full training pool.
MetricsReport bow_baseline(const ExperimentData& data, const ExperimentConfig& cfg);

/// "Ours" (the transformer) and "BoW", both evaluated on the test set.
std::vector<NamedReport> compare_methods(const ExperimentData& data, const ExperimentConfig& cfg);

/// CSV text with header `sweep,value,accuracy,precision,recall,train_seconds,seed`.
std::string results_csv(std::span<const SweepResult> results);
/// Inverse of results_csv; values are exact to the six digits written.
std::vector<SweepResult> parse_results_csv(const std::string& text);
/// Writes `path` (CSV) and the same basename with extension .svg.
void emit_results(std::span<const SweepResult> results, const std::filesystem::path& path);
std::string results_svg(std::span<const SweepResult> results);

/// Rank correlation with average ranks for ties; 0 when either side is
/// constant.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace medattn
