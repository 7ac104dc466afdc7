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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "medattn/autodiff.hpp"
#include "medattn/grad_check.hpp"
#include "medattn/model.hpp"
#include "medattn/text_pipeline.hpp"

namespace medattn {

enum class OptimizerKind { adam, sgd };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& name);

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 1;
  std::size_t max_epochs = 25;
  std::size_t patience = 5;  // 0 disables early stopping
  double eps_clamp = 1e-7;
  std::uint64_t seed = 1;
  double threshold = 0.5;
  OptimizerKind optimizer = OptimizerKind::adam;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// --- loss -----------------------------------------------------------------------

/// Mean over labels of -[y log p + (1 - y) log(1 - p)], with p clamped to
/// [eps_clamp, 1 - eps_clamp] first.
double bce_loss(std::span<const double> probs, std::span<const std::uint8_t> targets,
                double eps_clamp);
/// Differentiable form. Clamped probabilities receive zero gradient.
Var bce_loss(Var probs, std::span<const std::uint8_t> targets, double eps_clamp);

// --- optimizers -----------------------------------------------------------------

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

struct OptimizerState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;

  static OptimizerState zeros_like(std::span<Tensor* const> params);
  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

/// Bias-corrected Adam update in place. Throws NumericError naming the
/// parameter when a gradient entry is not finite.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads,
               OptimizerState& state, double learning_rate,
               std::span<const std::string> names = {});
/// Plain gradient descent; only the step counter of `state` is touched.
void sgd_step(std::span<Tensor* const> params, std::span<const Tensor> grads,
              OptimizerState& state, double learning_rate,
              std::span<const std::string> names = {});

// --- models the loop can fit ----------------------------------------------------

class TrainableModel {
 public:
  virtual ~TrainableModel() = default;
  virtual std::vector<Tensor*> parameters() = 0;
  virtual std::vector<std::string> parameter_names() const = 0;
  /// Loss of one example; overwrites `grads` (one tensor per parameter) with
  /// d loss / d parameter.
  virtual double loss_and_gradient(const EncodedExample& example, double eps_clamp,
                                   std::vector<Tensor>& grads) const = 0;
  virtual std::vector<double> predict(const EncodedExample& example) const = 0;
};

class TransformerClassifier final : public TrainableModel {
 public:
  TransformerClassifier(ModelConfig config, ModelParams params);
  explicit TransformerClassifier(const ModelConfig& config);

  std::vector<Tensor*> parameters() override { return params_.tensors(); }
  std::vector<std::string> parameter_names() const override { return params_.names(); }
  double loss_and_gradient(const EncodedExample& example, double eps_clamp,
                           std::vector<Tensor>& grads) const override;
  std::vector<double> predict(const EncodedExample& example) const override;

  const ModelConfig& config() const noexcept { return config_; }
  const ModelParams& params() const noexcept { return params_; }
  ModelParams& params() noexcept { return params_; }

 private:
  ModelConfig config_;
  ModelParams params_;
};

/// Probabilities for every example, [B x m]; rows are independent.
Tensor predict_all(const TrainableModel& model, std::span<const EncodedExample> examples);
/// Mean bce_loss over examples.
double mean_loss(const TrainableModel& model, std::span<const EncodedExample> examples,
                 double eps_clamp);

// --- the loop -------------------------------------------------------------------

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

/// Everything besides parameters that a run needs to continue exactly.
struct TrainingState {
  OptimizerState optimizer;
  std::size_t epoch = 0;  // completed epochs
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_improvement = 0;
  std::string rng_state;  // textual std::mt19937_64 state

  friend bool operator==(const TrainingState&, const TrainingState&) = default;
};

struct FitResult {
  std::vector<Tensor> best_params;
  TrainingState best_state;
  std::vector<Tensor> last_params;
  TrainingState last_state;
  std::vector<EpochRecord> history;
  bool stopped_early = false;
};

/// Mini-batch training: per epoch a seeded shuffle, then forward, loss,
/// backward and one optimizer step per batch; validation loss after every
/// epoch. Stops at max_epochs or after `patience` epochs without a new best
/// validation loss. On return the model holds the best-validation
/// parameters. Passing `resume` continues from a saved last state whose
/// parameters are already loaded into the model.
FitResult fit(TrainableModel& model, std::span<const EncodedExample> train_set,
              std::span<const EncodedExample> val_set, const TrainConfig& config,
              const TrainingState* resume = nullptr);

/// Seeded 90/10 split of [0, n) into (train, validation) index lists.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_validation(
    std::size_t n, std::uint64_t seed);

struct Checkpoint {
  int format_version = 1;
  ModelConfig model;
  TrainConfig train;
  ModelParams params;
  TrainingState state;

  bool bitwise_equal(const Checkpoint& other) const;
};

struct TrainResult {
  Checkpoint best;
  Checkpoint last;
  std::vector<EpochRecord> history;
  bool stopped_early = false;
};

/// Splits `dataset` 90/10 and trains a freshly initialized transformer.
TrainResult train(std::span<const EncodedExample> dataset, const ModelConfig& model_config,
                  const TrainConfig& train_config);
TrainResult train(std::span<const EncodedExample> train_set,
                  std::span<const EncodedExample> val_set, const ModelConfig& model_config,
                  const TrainConfig& train_config);
/// Continues `last` (a TrainResult::last checkpoint) until
/// train_config.max_epochs total epochs. `best` is the best checkpoint of the
/// interrupted run; it is returned as the best again when no later epoch
/// improves on it.
TrainResult resume_training(const Checkpoint& last, std::span<const EncodedExample> train_set,
                            std::span<const EncodedExample> val_set,
                            const TrainConfig& train_config, const Checkpoint* best = nullptr);

// --- gradient check --------------------------------------------------------------

/// Finite-difference check of bce_loss(predict(encode_sequence(example)))
/// with respect to every parameter coordinate.
GradCheckResult model_grad_check(const ModelConfig& config, const ModelParams& params,
                                 const EncodedExample& example, double eps_clamp,
                                 double step = 1e-5);

/// vocab 50, d_model 8, 2 heads, 1 layer, d_ff 16, max_len 12, 4 labels.
ModelConfig tiny_model_config(std::uint64_t seed = 1);
/// Random ids in [2, vocab), `real` unmasked positions followed by PAD, and
/// random labels with at least one positive.
EncodedExample random_example(const ModelConfig& config, std::size_t real, std::uint64_t seed);

/// `epoch,train_loss,val_loss,seconds`
void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

}  // namespace medattn
