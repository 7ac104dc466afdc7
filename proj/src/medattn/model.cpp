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

#include "medattn/model.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "medattn/errors.hpp"

namespace medattn {

namespace {

constexpr double kLayerNormEps = 1e-5;

bool all_set(std::span<const std::uint8_t> mask) {
  for (auto m : mask)
    if (!m) return false;
  return true;
}

void fill_positional_row(std::size_t pos, std::span<double> row) {
  const std::size_t d = row.size();
  for (std::size_t i = 0; 2 * i < d; ++i) {
    const double angle =
        static_cast<double>(pos) /
        std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d));
    row[2 * i] = std::sin(angle);
    row[2 * i + 1] = std::cos(angle);
  }
}

LayerParams make_layer(const ModelConfig& c) {
  const std::size_t d = c.d_model, f = c.d_ff;
  LayerParams l;
  l.w_q = Tensor::zeros({d, d});
  l.w_k = Tensor::zeros({d, d});
  l.w_v = Tensor::zeros({d, d});
  l.w_o = Tensor::zeros({d, d});
  l.ffn_w1 = Tensor::zeros({d, f});
  l.ffn_b1 = Tensor::zeros({f});
  l.ffn_w2 = Tensor::zeros({f, d});
  l.ffn_b2 = Tensor::zeros({d});
  l.ln1_gamma = Tensor::filled({d}, 1.0);
  l.ln1_beta = Tensor::zeros({d});
  l.ln2_gamma = Tensor::filled({d}, 1.0);
  l.ln2_beta = Tensor::zeros({d});
  return l;
}

template <typename Layer, typename Fn>
void for_each_layer_tensor(Layer& l, Fn&& fn) {
  fn("w_q", l.w_q);
  fn("w_k", l.w_k);
  fn("w_v", l.w_v);
  fn("w_o", l.w_o);
  fn("ffn_w1", l.ffn_w1);
  fn("ffn_b1", l.ffn_b1);
  fn("ffn_w2", l.ffn_w2);
  fn("ffn_b2", l.ffn_b2);
  fn("ln1_gamma", l.ln1_gamma);
  fn("ln1_beta", l.ln1_beta);
  fn("ln2_gamma", l.ln2_gamma);
  fn("ln2_beta", l.ln2_beta);
}

void fill_glorot(Tensor& w, std::mt19937_64& rng) {
  const double limit = glorot_limit(w.rows(), w.cols());
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : w.data()) v = dist(rng);
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size < 2) throw UsageError("model: vocab_size must be >= 2");
  if (d_model == 0 || n_heads == 0 || d_ff == 0 || max_len == 0 || n_labels == 0)
    throw UsageError("model: d_model, n_heads, d_ff, max_len and n_labels must be >= 1");
  if (d_model % n_heads != 0)
    throw UsageError("model: d_model (" + std::to_string(d_model) +
                     ") must be divisible by n_heads (" + std::to_string(n_heads) + ")");
  if (d_model % 2 != 0) throw UsageError("model: d_model must be even");
}

std::vector<Tensor*> ModelParams::tensors() {
  std::vector<Tensor*> out{&embedding};
  for (auto& l : layers) for_each_layer_tensor(l, [&](const char*, Tensor& t) { out.push_back(&t); });
  out.push_back(&head_w);
  out.push_back(&head_b);
  return out;
}

std::vector<const Tensor*> ModelParams::tensors() const {
  std::vector<const Tensor*> out{&embedding};
  for (const auto& l : layers)
    for_each_layer_tensor(l, [&](const char*, const Tensor& t) { out.push_back(&t); });
  out.push_back(&head_w);
  out.push_back(&head_b);
  return out;
}

std::vector<std::string> ModelParams::names() const {
  std::vector<std::string> out{"embedding"};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    for_each_layer_tensor(layers[i], [&](const char* name, const Tensor&) {
      out.push_back("layer" + std::to_string(i) + "." + name);
    });
  }
  out.push_back("head.w");
  out.push_back("head.b");
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : tensors()) n += t->size();
  return n;
}

bool ModelParams::bitwise_equal(const ModelParams& other) const {
  const auto a = tensors();
  const auto b = other.tensors();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!a[i]->bitwise_equal(*b[i])) return false;
  return true;
}

std::size_t expected_parameter_count(const ModelConfig& c) {
  const std::size_t d = c.d_model, f = c.d_ff;
  const std::size_t per_layer = 4 * d * d + d * f + f + f * d + d + 4 * d;
  return c.vocab_size * d + c.n_layers * per_layer + d * c.n_labels + c.n_labels;
}

double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

ModelParams init_params(const ModelConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  ModelParams p;
  p.embedding = Tensor::zeros({config.vocab_size, config.d_model});
  fill_glorot(p.embedding, rng);
  for (std::size_t i = 0; i < config.n_layers; ++i) {
    LayerParams l = make_layer(config);
    for (Tensor* w : {&l.w_q, &l.w_k, &l.w_v, &l.w_o, &l.ffn_w1, &l.ffn_w2}) fill_glorot(*w, rng);
    p.layers.push_back(std::move(l));
  }
  p.head_w = Tensor::zeros({config.d_model, config.n_labels});
  fill_glorot(p.head_w, rng);
  p.head_b = Tensor::zeros({config.n_labels});
  return p;
}

Tensor positional_encoding(std::size_t n, std::size_t d) {
  if (d % 2 != 0) throw UsageError("positional_encoding: dimension must be even, got " + std::to_string(d));
  Tensor pe = Tensor::zeros({n, d});
  for (std::size_t pos = 0; pos < n; ++pos) fill_positional_row(pos, pe.row(pos));
  return pe;
}

// --- tape level ---------------------------------------------------------------

std::vector<Var> BoundParams::all() const {
  std::vector<Var> out{embedding};
  for (const auto& l : layers) {
    for (Var v : {l.w_q, l.w_k, l.w_v, l.w_o, l.ffn_w1, l.ffn_b1, l.ffn_w2, l.ffn_b2,
                  l.ln1_gamma, l.ln1_beta, l.ln2_gamma, l.ln2_beta})
      out.push_back(v);
  }
  out.push_back(head_w);
  out.push_back(head_b);
  return out;
}

BoundParams bind(Tape& tape, const ModelParams& params, bool trainable) {
  auto put = [&](const Tensor& t) { return trainable ? tape.parameter(t) : tape.view(t); };
  BoundParams b;
  b.embedding = put(params.embedding);
  for (const auto& l : params.layers) {
    BoundLayer bl;
    bl.w_q = put(l.w_q);
    bl.w_k = put(l.w_k);
    bl.w_v = put(l.w_v);
    bl.w_o = put(l.w_o);
    bl.ffn_w1 = put(l.ffn_w1);
    bl.ffn_b1 = put(l.ffn_b1);
    bl.ffn_w2 = put(l.ffn_w2);
    bl.ffn_b2 = put(l.ffn_b2);
    bl.ln1_gamma = put(l.ln1_gamma);
    bl.ln1_beta = put(l.ln1_beta);
    bl.ln2_gamma = put(l.ln2_gamma);
    bl.ln2_beta = put(l.ln2_beta);
    b.layers.push_back(bl);
  }
  b.head_w = put(params.head_w);
  b.head_b = put(params.head_b);
  return b;
}

BoundParams bind_vars(std::span<const Var> vars, std::size_t n_layers) {
  if (vars.size() != 3 + 12 * n_layers)
    throw ShapeError("bind_vars: " + std::to_string(vars.size()) + " vars for " +
                     std::to_string(n_layers) + " layers");
  std::size_t i = 0;
  BoundParams b;
  b.embedding = vars[i++];
  for (std::size_t l = 0; l < n_layers; ++l) {
    BoundLayer bl;
    for (Var* v : {&bl.w_q, &bl.w_k, &bl.w_v, &bl.w_o, &bl.ffn_w1, &bl.ffn_b1, &bl.ffn_w2,
                   &bl.ffn_b2, &bl.ln1_gamma, &bl.ln1_beta, &bl.ln2_gamma, &bl.ln2_beta})
      *v = vars[i++];
    b.layers.push_back(bl);
  }
  b.head_w = vars[i++];
  b.head_b = vars[i++];
  return b;
}

Var embed(Tape& tape, const BoundParams& params, std::span<const std::int32_t> ids,
          std::span<const std::size_t> positions, std::size_t d_model) {
  if (ids.size() != positions.size()) throw ShapeError("embed: ids and positions differ in length");
  if (d_model % 2 != 0) throw UsageError("embed: d_model must be even");
  Tensor pe = Tensor::zeros({ids.size(), d_model});
  for (std::size_t i = 0; i < positions.size(); ++i) fill_positional_row(positions[i], pe.row(i));
  return ad::add(ad::gather_rows(params.embedding, ids), tape.constant(std::move(pe)));
}

Var scaled_dot_attention(Var q, Var k, Var v, std::span<const std::uint8_t> key_mask) {
  const std::size_t n_keys = k.value().rows();
  if (key_mask.size() != n_keys) {
    throw ShapeError("attention: mask length " + std::to_string(key_mask.size()) +
                     " != key count " + std::to_string(n_keys));
  }
  bool any = false;
  for (auto m : key_mask) any = any || m;
  if (!any) throw NumericError("attention: mask selects no key position");

  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(q.value().cols()));
  Var scores = ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt_dk);
  if (!all_set(key_mask)) {
    Tensor bias = Tensor::zeros({1, n_keys});
    for (std::size_t j = 0; j < n_keys; ++j)
      if (!key_mask[j]) bias[j] = -std::numeric_limits<double>::infinity();
    scores = ad::add(scores, q.tape()->constant(std::move(bias)));
  }
  return ad::matmul(ad::softmax_rows(scores), v);
}

Var multi_head_attention(Var x, const BoundLayer& layer, std::size_t n_heads,
                         std::span<const std::uint8_t> key_mask) {
  const std::size_t d_model = x.value().cols();
  if (n_heads == 0 || d_model % n_heads != 0)
    throw UsageError("multi_head_attention: d_model not divisible by n_heads");
  const std::size_t d_head = d_model / n_heads;
  Var q = ad::matmul(x, layer.w_q);
  Var k = ad::matmul(x, layer.w_k);
  Var v = ad::matmul(x, layer.w_v);
  if (n_heads == 1) return ad::matmul(scaled_dot_attention(q, k, v, key_mask), layer.w_o);
  std::vector<Var> heads;
  heads.reserve(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const std::size_t b = h * d_head;
    heads.push_back(scaled_dot_attention(ad::slice_cols(q, b, d_head), ad::slice_cols(k, b, d_head),
                                         ad::slice_cols(v, b, d_head), key_mask));
  }
  return ad::matmul(ad::concat_last(heads), layer.w_o);
}

Var encoder_layer(Var x, const BoundLayer& layer, std::size_t n_heads,
                  std::span<const std::uint8_t> key_mask) {
  Var attn = multi_head_attention(x, layer, n_heads, key_mask);
  Var x1 = ad::layer_norm(ad::add(x, attn), layer.ln1_gamma, layer.ln1_beta, kLayerNormEps);
  Var hidden = ad::relu(ad::add(ad::matmul(x1, layer.ffn_w1), layer.ffn_b1));
  Var ffn = ad::add(ad::matmul(hidden, layer.ffn_w2), layer.ffn_b2);
  return ad::layer_norm(ad::add(x1, ffn), layer.ln2_gamma, layer.ln2_beta, kLayerNormEps);
}

Var encode_sequence(Tape& tape, const BoundParams& params, const ModelConfig& config,
                    const EncodedExample& example) {
  std::vector<std::int32_t> ids;
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < example.ids.size() && i < example.mask.size(); ++i) {
    if (!example.mask[i]) continue;
    ids.push_back(example.ids[i]);
    positions.push_back(i);
  }
  if (ids.empty()) throw NumericError("encode_sequence: example has no unmasked position");
  for (auto id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= config.vocab_size)
      throw DataError("encode_sequence: token id " + std::to_string(id) + " >= vocab_size " +
                      std::to_string(config.vocab_size));
  }
  const std::vector<std::uint8_t> full(ids.size(), 1);
  Var x = embed(tape, params, ids, positions, config.d_model);
  for (const auto& layer : params.layers) x = encoder_layer(x, layer, config.n_heads, full);
  return ad::mean_pool_masked(x, full);
}

Var encode_sequence_padded(Tape& tape, const BoundParams& params, const ModelConfig& config,
                           const EncodedExample& example) {
  if (example.ids.size() != example.mask.size())
    throw ShapeError("encode_sequence_padded: ids and mask differ in length");
  std::vector<std::size_t> positions(example.ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
  Var x = embed(tape, params, example.ids, positions, config.d_model);
  for (const auto& layer : params.layers) x = encoder_layer(x, layer, config.n_heads, example.mask);
  return ad::mean_pool_masked(x, example.mask);
}

Var predict(Var h, const BoundParams& params) {
  return ad::sigmoid(ad::add(ad::matmul(h, params.head_w), params.head_b));
}

// --- value level ----------------------------------------------------------------

Tensor attention_weights(const Tensor& q, const Tensor& k, std::span<const std::uint8_t> key_mask) {
  if (key_mask.size() != k.rows()) throw ShapeError("attention_weights: mask length mismatch");
  bool any = false;
  for (auto m : key_mask) any = any || m;
  if (!any) throw NumericError("attention_weights: mask selects no key position");
  Tensor scores = scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(q.cols())));
  for (std::size_t r = 0; r < scores.rows(); ++r)
    for (std::size_t j = 0; j < scores.cols(); ++j)
      if (!key_mask[j]) scores(r, j) = -std::numeric_limits<double>::infinity();
  return softmax_rows(scores);
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::span<const std::uint8_t> key_mask) {
  Tape tape;
  return scaled_dot_attention(tape.view(q), tape.view(k), tape.view(v), key_mask).value();
}

Tensor encode_sequence(const ModelParams& params, const ModelConfig& config,
                       const EncodedExample& example) {
  Tape tape;
  const BoundParams b = bind(tape, params, false);
  return encode_sequence(tape, b, config, example).value();
}

Tensor predict(const Tensor& h, const Tensor& head_w, const Tensor& head_b) {
  if (h.size() != head_w.rows() || head_b.size() != head_w.cols())
    throw ShapeError("predict: h/W/b shapes disagree");
  Tensor logits = matmul(Tensor({h.size()}, h.values()), head_w);
  return sigmoid(elementwise(ElementwiseOp::add, logits, head_b));
}

std::vector<double> predict_example(const ModelParams& params, const ModelConfig& config,
                                    const EncodedExample& example) {
  Tape tape;
  const BoundParams b = bind(tape, params, false);
  return predict(encode_sequence(tape, b, config, example), b).value().values();
}

Tensor forward_batch(std::span<const EncodedExample> examples, const ModelParams& params,
                     const ModelConfig& config) {
  if (examples.empty()) throw UsageError("forward_batch: empty batch");
  Tensor out = Tensor::zeros({examples.size(), config.n_labels});
  for (std::size_t b = 0; b < examples.size(); ++b) {
    const auto probs = predict_example(params, config, examples[b]);
    std::copy(probs.begin(), probs.end(), out.row(b).begin());
  }
  return out;
}

}  // namespace medattn
