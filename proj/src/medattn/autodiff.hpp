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

// Reverse-mode differentiation over rank-1/rank-2 tensors.
//
// A Tape records every operation applied to its Vars in execution order, so
// node ids are already a topological order. backward() walks the ids in
// reverse, visiting each node once. One tape is meant to be built by one
// thread; separate tapes share nothing and can run concurrently.

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "medattn/tensor.hpp"

namespace medattn {

class Tape;

/// Handle to a tensor recorded on a Tape.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Leaf-gradient map keyed by node id.
using GradientMap = std::map<std::size_t, Tensor>;

class Tape {
 public:
  using Backprop = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Value that never receives a gradient.
  Var constant(Tensor value);
  /// Reads `value` in place without tracking a gradient; the referenced
  /// tensor must outlive the tape.
  Var view(const Tensor& value);
  /// Owned leaf that receives a gradient.
  Var variable(Tensor value);
  /// Leaf that reads `value` in place; the referenced tensor must outlive the
  /// tape and stay unmodified while it is in use.
  Var parameter(const Tensor& value);

  const Tensor& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse accumulation from a scalar loss. Returns d loss / d leaf for
  /// every leaf created with variable() or parameter(); leaves the loss does
  /// not depend on get zero tensors.
  GradientMap backward(Var loss);

  /// Appends an op node. `inputs` lists the node ids the op read; the node
  /// requires a gradient iff any input does, and `fn` is dropped otherwise.
  Var record(Tensor value, std::span<const std::size_t> inputs, Backprop fn);

  /// Accumulated upstream gradient of `id` during backward, allocated as
  /// zeros on first use.
  Tensor& grad(std::size_t id);
  bool has_grad(std::size_t id) const { return nodes_[id].grad.has_value(); }

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    std::optional<Tensor> grad;
    Backprop backprop;
    bool requires_grad = false;
    bool leaf = false;
  };
  Var push(Node node);

  std::deque<Node> nodes_;  // deque keeps value references stable
};

// Differentiable ops. All inputs must live on the same tape.
namespace ad {

Var matmul(Var a, Var b);
Var transpose(Var a);
/// Same-shape add, or b a single row broadcast over a's rows.
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Same-shape elementwise product.
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var softmax_rows(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var layer_norm(Var a, Var gamma, Var beta, double eps = 1e-5);
Var concat_last(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t width);
Var mean_pool_masked(Var a, std::span<const std::uint8_t> mask);
/// Rows `ids` of `table`, stacked; the gradient scatters back to those rows.
Var gather_rows(Var table, std::span<const std::int32_t> ids);
/// Scalar sum of all entries.
Var sum(Var a);

}  // namespace ad

}  // namespace medattn
