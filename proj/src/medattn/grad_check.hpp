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
#include <functional>
#include <span>
#include <vector>

#include "medattn/autodiff.hpp"

namespace medattn {

/// Scalar function of a list of tensors, expressed on a tape so that the
/// checker can differentiate it. Must be deterministic.
using TapeFunction = std::function<Var(Tape&, std::span<const Var> params)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t param_index = 0;   // tensor holding the worst coordinate
  std::size_t coordinate = 0;    // flat index within that tensor
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates_checked = 0;
};

/// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double a, double b) noexcept;

/// Compares backward() against central differences (f(x+h) - f(x-h)) / 2h on
/// every coordinate of every tensor in `params`. Throws NumericError if f
/// produces a non-finite value or `step` is not positive.
GradCheckResult grad_check(const TapeFunction& f, std::vector<Tensor> params, double step);

}  // namespace medattn
