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

#include "medattn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "medattn/errors.hpp"

namespace medattn {

namespace {

double evaluate(const TapeFunction& f, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(tape.constant(p));
  const Tensor& out = f(tape, vars).value();
  if (out.size() != 1) throw ShapeError("grad_check: function must return a scalar");
  if (!std::isfinite(out[0])) throw NumericError("grad_check: function value is not finite");
  return out[0];
}

}  // namespace

double relative_error(double a, double b) noexcept {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / denom;
}

GradCheckResult grad_check(const TapeFunction& f, std::vector<Tensor> params, double step) {
  if (!(step > 0.0)) throw NumericError("grad_check: step must be positive");

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& p : params) vars.push_back(tape.parameter(p));
    Var loss = f(tape, vars);
    if (!std::isfinite(loss.value()[0]))
      throw NumericError("grad_check: function value is not finite");
    GradientMap grads = tape.backward(loss);
    for (const Var& v : vars) analytic.push_back(std::move(grads.at(v.id())));
  }

  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double saved = params[p][i];
      params[p][i] = saved + step;
      const double plus = evaluate(f, params);
      params[p][i] = saved - step;
      const double minus = evaluate(f, params);
      params[p][i] = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double err = relative_error(analytic[p][i], numeric);
      ++result.coordinates_checked;
      if (err > result.max_rel_error || result.coordinates_checked == 1) {
        result.max_rel_error = err;
        result.param_index = p;
        result.coordinate = i;
        result.analytic = analytic[p][i];
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace medattn
