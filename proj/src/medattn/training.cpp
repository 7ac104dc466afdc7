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

#include "medattn/training.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "medattn/errors.hpp"
#include "medattn/parallel.hpp"

namespace medattn {

namespace {

std::string param_name(std::span<const std::string> names, std::size_t i) {
  return i < names.size() ? names[i] : "parameter #" + std::to_string(i);
}

void check_step_args(std::span<Tensor* const> params, std::span<const Tensor> grads,
                     double learning_rate, std::span<const std::string> names) {
  if (!(learning_rate > 0.0)) throw UsageError("optimizer: learning rate must be > 0");
  if (params.size() != grads.size())
    throw ShapeError("optimizer: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape())
      throw ShapeError("optimizer: gradient shape " + shape_string(grads[i].shape()) +
                       " does not match " + param_name(names, i) + " " +
                       shape_string(params[i]->shape()));
    if (!grads[i].all_finite())
      throw NumericError("optimizer: non-finite gradient for " + param_name(names, i));
  }
}

std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

void rng_from_string(std::mt19937_64& rng, const std::string& text) {
  std::istringstream in(text);
  in >> rng;
  if (!in) throw DataError("training: malformed RNG state");
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

bool tensors_bitwise_equal(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!a[i].bitwise_equal(b[i])) return false;
  return true;
}

std::vector<Tensor> snapshot(const std::vector<Tensor*>& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Tensor* p : params) out.push_back(*p);
  return out;
}

void restore(const std::vector<Tensor*>& params, const std::vector<Tensor>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) *params[i] = values[i];
}

ModelParams params_from_list(const ModelConfig& config, std::vector<Tensor> values) {
  ModelParams p = init_params(config);
  auto slots = p.tensors();
  for (std::size_t i = 0; i < slots.size(); ++i) *slots[i] = std::move(values[i]);
  return p;
}

}  // namespace

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd") return OptimizerKind::sgd;
  throw UsageError("unknown optimizer '" + name + "' (expected adam or sgd)");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw UsageError("train: learning_rate must be > 0");
  if (batch_size < 1) throw UsageError("train: batch_size must be >= 1");
  if (!(eps_clamp > 0.0 && eps_clamp < 0.5)) throw UsageError("train: eps_clamp must be in (0, 0.5)");
  if (!(threshold > 0.0 && threshold < 1.0)) throw UsageError("train: threshold must be in (0, 1)");
}

// --- loss -------------------------------------------------------------------------

double bce_loss(std::span<const double> probs, std::span<const std::uint8_t> targets,
                double eps_clamp) {
  if (probs.size() != targets.size())
    throw ShapeError("bce_loss: " + std::to_string(probs.size()) + " probabilities vs " +
                     std::to_string(targets.size()) + " targets");
  if (probs.empty()) throw ShapeError("bce_loss: no labels");
  double total = 0.0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    const double p = std::clamp(probs[j], eps_clamp, 1.0 - eps_clamp);
    total += targets[j] ? std::log(p) : std::log(1.0 - p);
  }
  return -total / static_cast<double>(probs.size());
}

Var bce_loss(Var probs, std::span<const std::uint8_t> targets, double eps_clamp) {
  const Tensor& p = probs.value();
  const double loss = bce_loss(p.data(), targets, eps_clamp);
  const std::array<std::size_t, 1> in{probs.id()};
  return probs.tape()->record(
      Tensor({1}, {loss}), in,
      [ip = probs.id(), y = std::vector<std::uint8_t>(targets.begin(), targets.end()),
       eps_clamp](Tape& tp, std::size_t self) {
        const double g = tp.grad(self)[0];
        const Tensor& p = tp.value(ip);
        Tensor& gp = tp.grad(ip);
        const double inv_m = 1.0 / static_cast<double>(y.size());
        for (std::size_t j = 0; j < y.size(); ++j) {
          const double pj = p[j];
          if (pj < eps_clamp || pj > 1.0 - eps_clamp) continue;
          const double d = y[j] ? -1.0 / pj : 1.0 / (1.0 - pj);
          gp[j] += g * d * inv_m;
        }
      });
}

// --- optimizers -------------------------------------------------------------------

OptimizerState OptimizerState::zeros_like(std::span<Tensor* const> params) {
  OptimizerState s;
  for (const Tensor* p : params) {
    s.first_moment.push_back(Tensor::zeros_like(*p));
    s.second_moment.push_back(Tensor::zeros_like(*p));
  }
  return s;
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads,
               OptimizerState& state, double learning_rate, std::span<const std::string> names) {
  check_step_args(params, grads, learning_rate, names);
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size())
    throw ShapeError("adam_step: optimizer state does not match parameter list");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(kAdamBeta1, t);
  const double bias2 = 1.0 - std::pow(kAdamBeta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i].data();
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = kAdamBeta1 * m[k] + (1.0 - kAdamBeta1) * g[k];
      v[k] = kAdamBeta2 * v[k] + (1.0 - kAdamBeta2) * g[k] * g[k];
      const double m_hat = m[k] / bias1;
      const double v_hat = v[k] / bias2;
      p[k] -= learning_rate * m_hat / (std::sqrt(v_hat) + kAdamEpsilon);
    }
  }
}

void sgd_step(std::span<Tensor* const> params, std::span<const Tensor> grads,
              OptimizerState& state, double learning_rate, std::span<const std::string> names) {
  check_step_args(params, grads, learning_rate, names);
  ++state.step;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= learning_rate * g[k];
  }
}

// --- transformer classifier -------------------------------------------------------

TransformerClassifier::TransformerClassifier(ModelConfig config, ModelParams params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
}

TransformerClassifier::TransformerClassifier(const ModelConfig& config)
    : TransformerClassifier(config, init_params(config)) {}

double TransformerClassifier::loss_and_gradient(const EncodedExample& example, double eps_clamp,
                                                std::vector<Tensor>& grads) const {
  Tape tape;
  const BoundParams bound = bind(tape, params_, true);
  Var probs = medattn::predict(encode_sequence(tape, bound, config_, example), bound);
  Var loss = bce_loss(probs, example.labels, eps_clamp);
  GradientMap g = tape.backward(loss);
  const auto vars = bound.all();
  grads.resize(vars.size());
  for (std::size_t i = 0; i < vars.size(); ++i) grads[i] = std::move(g.at(vars[i].id()));
  return loss.value()[0];
}

std::vector<double> TransformerClassifier::predict(const EncodedExample& example) const {
  return predict_example(params_, config_, example);
}

Tensor predict_all(const TrainableModel& model, std::span<const EncodedExample> examples) {
  if (examples.empty()) throw UsageError("predict_all: no examples");
  std::vector<std::vector<double>> rows(examples.size());
  parallel_for(examples.size(), [&](std::size_t i) { rows[i] = model.predict(examples[i]); });
  Tensor out = Tensor::zeros({examples.size(), rows[0].size()});
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), out.row(i).begin());
  return out;
}

double mean_loss(const TrainableModel& model, std::span<const EncodedExample> examples,
                 double eps_clamp) {
  const Tensor probs = predict_all(model, examples);
  double total = 0.0;
  for (std::size_t i = 0; i < examples.size(); ++i)
    total += bce_loss(probs.row(i), examples[i].labels, eps_clamp);
  return total / static_cast<double>(examples.size());
}

// --- loop -------------------------------------------------------------------------

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_validation(
    std::size_t n, std::uint64_t seed) {
  if (n < 2) throw DataError("training: need at least 2 examples to split train/validation");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed ^ 0x5eed5eed5eed5eedULL);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_val = std::clamp<std::size_t>((n + 5) / 10, 1, n - 1);
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  return {std::move(train), std::move(val)};
}

FitResult fit(TrainableModel& model, std::span<const EncodedExample> train_set,
              std::span<const EncodedExample> val_set, const TrainConfig& config,
              const TrainingState* resume) {
  config.validate();
  if (train_set.empty()) throw DataError("training: empty training set");
  if (val_set.empty()) throw DataError("training: empty validation set");

  const std::vector<Tensor*> params = model.parameters();
  const std::vector<std::string> names = model.parameter_names();

  TrainingState state;
  std::mt19937_64 rng(config.seed);
  if (resume) {
    state = *resume;
    rng_from_string(rng, state.rng_state);
    if (state.optimizer.first_moment.size() != params.size())
      throw DataError("training: resume state does not match the model");
  } else {
    state.optimizer = OptimizerState::zeros_like(params);
    state.rng_state = rng_to_string(rng);
  }

  FitResult result;
  result.best_params = snapshot(params);
  result.best_state = state;

  const std::size_t n = train_set.size();
  const std::size_t workers = worker_count();
  std::vector<std::size_t> order(n);
  std::vector<Tensor> accum;
  std::vector<Tensor> scratch;
  std::vector<std::vector<Tensor>> slots;
  std::vector<double> slot_loss;

  for (std::size_t epoch = state.epoch; epoch < config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const std::size_t b = end - start;
      accum.clear();
      for (const Tensor* p : params) accum.push_back(Tensor::zeros_like(*p));
      double batch_loss = 0.0;

      auto add_example = [&](const std::vector<Tensor>& g, double loss) {
        batch_loss += loss;
        for (std::size_t i = 0; i < accum.size(); ++i) {
          auto a = accum[i].data();
          auto s = g[i].data();
          for (std::size_t k = 0; k < a.size(); ++k) a[k] += s[k];
        }
      };
      // Per-example gradients are summed in batch order whatever the worker
      // count, so results do not depend on threading.
      if (workers <= 1 || b == 1) {
        for (std::size_t i = start; i < end; ++i) {
          const double loss = model.loss_and_gradient(train_set[order[i]], config.eps_clamp, scratch);
          add_example(scratch, loss);
        }
      } else {
        slots.assign(b, {});
        slot_loss.assign(b, 0.0);
        parallel_for(b, [&](std::size_t k) {
          slot_loss[k] = model.loss_and_gradient(train_set[order[start + k]], config.eps_clamp, slots[k]);
        });
        for (std::size_t k = 0; k < b; ++k) add_example(slots[k], slot_loss[k]);
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericError("training: non-finite loss at epoch " + std::to_string(epoch + 1) +
                           ", batch " + std::to_string(batch_index + 1));
      }
      const double inv_b = 1.0 / static_cast<double>(b);
      for (auto& a : accum)
        for (double& v : a.data()) v *= inv_b;
      if (config.optimizer == OptimizerKind::adam) {
        adam_step(params, accum, state.optimizer, config.learning_rate, names);
      } else {
        sgd_step(params, accum, state.optimizer, config.learning_rate, names);
      }
      epoch_loss += batch_loss;
    }

    const double val_loss = mean_loss(model, val_set, config.eps_clamp);
    if (!std::isfinite(val_loss))
      throw NumericError("training: non-finite validation loss at epoch " + std::to_string(epoch + 1));
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back({epoch + 1, epoch_loss / static_cast<double>(n), val_loss, seconds});

    state.epoch = epoch + 1;
    state.rng_state = rng_to_string(rng);
    if (val_loss < state.best_val_loss) {
      state.best_val_loss = val_loss;
      state.epochs_since_improvement = 0;
      result.best_params = snapshot(params);
      result.best_state = state;
    } else {
      ++state.epochs_since_improvement;
    }
    if (config.patience > 0 && state.epochs_since_improvement >= config.patience) {
      result.stopped_early = true;
      break;
    }
  }

  result.last_params = snapshot(params);
  result.last_state = state;
  restore(params, result.best_params);
  return result;
}

bool Checkpoint::bitwise_equal(const Checkpoint& other) const {
  return format_version == other.format_version && model == other.model &&
         train == other.train &&
         params.bitwise_equal(other.params) &&
         tensors_bitwise_equal(state.optimizer.first_moment, other.state.optimizer.first_moment) &&
         tensors_bitwise_equal(state.optimizer.second_moment, other.state.optimizer.second_moment) &&
         state.optimizer.step == other.state.optimizer.step && state.epoch == other.state.epoch &&
         same_bits(state.best_val_loss, other.state.best_val_loss) &&
         state.epochs_since_improvement == other.state.epochs_since_improvement &&
         state.rng_state == other.state.rng_state;
}

namespace {

TrainResult package(const ModelConfig& model_config, const TrainConfig& train_config,
                    FitResult fit_result) {
  TrainResult out;
  out.best.model = model_config;
  out.best.train = train_config;
  out.best.params = params_from_list(model_config, std::move(fit_result.best_params));
  out.best.state = std::move(fit_result.best_state);
  out.last.model = model_config;
  out.last.train = train_config;
  out.last.params = params_from_list(model_config, std::move(fit_result.last_params));
  out.last.state = std::move(fit_result.last_state);
  out.history = std::move(fit_result.history);
  out.stopped_early = fit_result.stopped_early;
  return out;
}

}  // namespace

TrainResult train(std::span<const EncodedExample> dataset, const ModelConfig& model_config,
                  const TrainConfig& train_config) {
  if (dataset.empty()) throw DataError("training: empty dataset");
  const auto [train_idx, val_idx] = split_train_validation(dataset.size(), train_config.seed);
  std::vector<EncodedExample> train_set, val_set;
  for (auto i : train_idx) train_set.push_back(dataset[i]);
  for (auto i : val_idx) val_set.push_back(dataset[i]);
  return train(train_set, val_set, model_config, train_config);
}

TrainResult train(std::span<const EncodedExample> train_set,
                  std::span<const EncodedExample> val_set, const ModelConfig& model_config,
                  const TrainConfig& train_config) {
  TransformerClassifier model(model_config);
  return package(model_config, train_config, fit(model, train_set, val_set, train_config));
}

TrainResult resume_training(const Checkpoint& last, std::span<const EncodedExample> train_set,
                            std::span<const EncodedExample> val_set,
                            const TrainConfig& train_config, const Checkpoint* best) {
  TransformerClassifier model(last.model, last.params);
  TrainResult out = package(last.model, train_config,
                            fit(model, train_set, val_set, train_config, &last.state));
  if (best && out.best.state.epoch == last.state.epoch && best->model == last.model &&
      same_bits(best->state.best_val_loss, last.state.best_val_loss)) {
    out.best.params = best->params;
    out.best.state = best->state;
  }
  return out;
}

GradCheckResult model_grad_check(const ModelConfig& config, const ModelParams& params,
                                 const EncodedExample& example, double eps_clamp, double step) {
  std::vector<Tensor> start;
  for (const Tensor* t : params.tensors()) start.push_back(*t);
  const TapeFunction f = [&](Tape&, std::span<const Var> vars) {
    const BoundParams bound = bind_vars(vars, config.n_layers);
    Tape& tape = *vars.front().tape();
    return bce_loss(medattn::predict(encode_sequence(tape, bound, config, example), bound),
                    example.labels, eps_clamp);
  };
  return grad_check(f, std::move(start), step);
}

ModelConfig tiny_model_config(std::uint64_t seed) {
  ModelConfig c;
  c.vocab_size = 50;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_layers = 1;
  c.d_ff = 16;
  c.max_len = 12;
  c.n_labels = 4;
  c.seed = seed;
  return c;
}

EncodedExample random_example(const ModelConfig& config, std::size_t real, std::uint64_t seed) {
  if (real == 0 || real > config.max_len) throw UsageError("random_example: need 1 <= real <= max_len");
  if (config.vocab_size < 3) throw UsageError("random_example: vocabulary too small");
  std::mt19937_64 rng(seed);
  EncodedExample ex;
  ex.ids.assign(config.max_len, Vocabulary::kPad);
  ex.mask.assign(config.max_len, 0);
  for (std::size_t i = 0; i < real; ++i) {
    ex.ids[i] = static_cast<std::int32_t>(2 + rng() % (config.vocab_size - 2));
    ex.mask[i] = 1;
  }
  ex.labels.resize(config.n_labels);
  for (auto& y : ex.labels) y = static_cast<std::uint8_t>(rng() & 1u);
  ex.labels[rng() % config.n_labels] = 1;
  return ex;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "epoch,train_loss,val_loss,seconds\n";
  char buf[128];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.6f\n", h.epoch, h.train_loss, h.val_loss,
                  h.seconds);
    out << buf;
  }
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace medattn
