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

// Transformer encoder for multi-label note classification:
//
//   token ids -> embedding + sinusoidal positions
//             -> L x [ LN(x + MHA(x)) -> LN(x + FFN(x)) ]     (post-LN)
//             -> masked mean pooling -> sigmoid(W^T h + b)
//
// Attention heads split the Q/K/V projections column-wise into n_heads
// blocks of width d_model / n_heads.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "medattn/autodiff.hpp"
#include "medattn/tensor.hpp"
#include "medattn/text_pipeline.hpp"

namespace medattn {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t d_ff = 128;
  std::size_t max_len = 128;
  std::size_t n_labels = 0;
  std::uint64_t seed = 1;

  std::size_t d_head() const { return d_model / n_heads; }
  /// Throws UsageError on zero dimensions, d_model not divisible by n_heads,
  /// or an odd d_model (sinusoidal positions need pairs).
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LayerParams {
  Tensor w_q, w_k, w_v, w_o;    // [d_model x d_model]
  Tensor ffn_w1, ffn_b1;        // [d_model x d_ff], [d_ff]
  Tensor ffn_w2, ffn_b2;        // [d_ff x d_model], [d_model]
  Tensor ln1_gamma, ln1_beta;   // [d_model]
  Tensor ln2_gamma, ln2_beta;   // [d_model]

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct ModelParams {
  Tensor embedding;  // [vocab_size x d_model]
  std::vector<LayerParams> layers;
  Tensor head_w;     // [d_model x n_labels]
  Tensor head_b;     // [n_labels]

  /// Every tensor in a fixed order (embedding, layers in order, head).
  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  /// Names matching tensors(), e.g. "layer0.w_q".
  std::vector<std::string> names() const;
  std::size_t parameter_count() const;
  bool bitwise_equal(const ModelParams& other) const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Closed-form parameter count for a config.
std::size_t expected_parameter_count(const ModelConfig& config);

/// Glorot-uniform weights from a generator seeded with config.seed; biases
/// and layer-norm betas zero, layer-norm gammas one.
ModelParams init_params(const ModelConfig& config);

/// Bound on |entry| used by init_params for a weight of the given fan sizes.
double glorot_limit(std::size_t fan_in, std::size_t fan_out);

/// PE[pos, 2i] = sin(pos / 10000^(2i/d)), PE[pos, 2i+1] = cos(same).
Tensor positional_encoding(std::size_t n, std::size_t d);

// --- tape-level building blocks ----------------------------------------------

struct BoundLayer {
  Var w_q, w_k, w_v, w_o, ffn_w1, ffn_b1, ffn_w2, ffn_b2, ln1_gamma, ln1_beta, ln2_gamma,
      ln2_beta;
};

struct BoundParams {
  Var embedding;
  std::vector<BoundLayer> layers;
  Var head_w, head_b;
  /// Vars in ModelParams::tensors() order.
  std::vector<Var> all() const;
};

/// Puts params on the tape by reference. With `trainable` the leaves collect
/// gradients; otherwise they are read-only views.
BoundParams bind(Tape& tape, const ModelParams& params, bool trainable);
/// Inverse of BoundParams::all().
BoundParams bind_vars(std::span<const Var> vars, std::size_t n_layers);

/// Embedding rows for `ids` plus the positional rows for `positions`.
Var embed(Tape& tape, const BoundParams& params, std::span<const std::int32_t> ids,
          std::span<const std::size_t> positions, std::size_t d_model);

/// softmax(Q K^T / sqrt(d_k) + mask_bias) V where masked keys get -inf.
/// Throws NumericError when the mask selects no key.
Var scaled_dot_attention(Var q, Var k, Var v, std::span<const std::uint8_t> key_mask);
Var multi_head_attention(Var x, const BoundLayer& layer, std::size_t n_heads,
                         std::span<const std::uint8_t> key_mask);
Var encoder_layer(Var x, const BoundLayer& layer, std::size_t n_heads,
                  std::span<const std::uint8_t> key_mask);

/// Aggregate representation h of one example. Only unmasked positions are
/// materialized: masked keys receive zero attention weight and masked rows
/// are dropped by pooling, so they cannot influence h.
Var encode_sequence(Tape& tape, const BoundParams& params, const ModelConfig& config,
                    const EncodedExample& example);
/// Same as encode_sequence but carries all max_len positions through every
/// layer with an explicit key mask; reference path for tests.
Var encode_sequence_padded(Tape& tape, const BoundParams& params, const ModelConfig& config,
                           const EncodedExample& example);

/// sigmoid(h W + b), one probability per label.
Var predict(Var h, const BoundParams& params);

// --- value-level wrappers ------------------------------------------------------

/// Attention probabilities softmax(Q K^T / sqrt(d_k)) with masked keys at 0.
Tensor attention_weights(const Tensor& q, const Tensor& k, std::span<const std::uint8_t> key_mask);
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::span<const std::uint8_t> key_mask);
Tensor encode_sequence(const ModelParams& params, const ModelConfig& config,
                       const EncodedExample& example);
Tensor predict(const Tensor& h, const Tensor& head_w, const Tensor& head_b);
std::vector<double> predict_example(const ModelParams& params, const ModelConfig& config,
                                    const EncodedExample& example);
/// [B x m] probabilities; each row depends only on its own example.
Tensor forward_batch(std::span<const EncodedExample> examples, const ModelParams& params,
                     const ModelConfig& config);

}  // namespace medattn
