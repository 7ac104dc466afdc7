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

#include "medattn/autodiff.hpp"

#include <array>
#include <cmath>
#include <string>

#include "medattn/errors.hpp"

namespace medattn {

const Tensor& Var::value() const {
  if (!tape_) throw Error(ErrorKind::numeric, "Var: not attached to a tape");
  return tape_->value(id_);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  return push(std::move(n));
}

Var Tape::view(const Tensor& value) {
  Node n;
  n.external = &value;
  return push(std::move(n));
}

Var Tape::variable(Tensor value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  n.leaf = true;
  return push(std::move(n));
}

Var Tape::parameter(const Tensor& value) {
  Node n;
  n.external = &value;
  n.requires_grad = true;
  n.leaf = true;
  return push(std::move(n));
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.external ? *n.external : n.owned;
}

Var Tape::record(Tensor value, std::span<const std::size_t> inputs, Backprop fn) {
  Node n;
  n.owned = std::move(value);
  for (auto id : inputs) {
    if (nodes_.at(id).requires_grad) {
      n.requires_grad = true;
      break;
    }
  }
  if (n.requires_grad) n.backprop = std::move(fn);
  return push(std::move(n));
}

Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.grad) n.grad = Tensor::zeros_like(n.external ? *n.external : n.owned);
  return *n.grad;
}

GradientMap Tape::backward(Var loss) {
  if (loss.tape() != this || loss.id() >= nodes_.size()) {
    throw Error(ErrorKind::numeric, "backward: loss is not recorded on this tape");
  }
  if (value(loss.id()).size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " +
                     shape_string(value(loss.id()).shape()));
  }
  for (auto& n : nodes_) n.grad.reset();
  grad(loss.id())[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.grad || n.leaf) continue;
    if (n.backprop) n.backprop(*this, id);
  }
  GradientMap out;
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    Node& n = nodes_[id];
    if (!n.leaf) continue;
    out.emplace(id, n.grad ? std::move(*n.grad) : Tensor::zeros_like(value(id)));
    n.grad.reset();
  }
  return out;
}

namespace ad {

namespace {

Tape& same_tape(Var a, Var b) {
  if (!a.valid() || a.tape() != b.tape()) {
    throw Error(ErrorKind::numeric, "ad: operands live on different tapes");
  }
  return *a.tape();
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw Error(ErrorKind::numeric, "ad: operand not attached to a tape");
  return *a.tape();
}

void add_into(Tensor& dst, const Tensor& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const std::array<std::size_t, 2> in{a.id(), b.id()};
  return t.record(medattn::matmul(a.value(), b.value()), in,
                  [ia = a.id(), ib = b.id()](Tape& tp, std::size_t self) {
                    const Tensor& g = tp.grad(self);
                    if (tp.requires_grad(ia)) gemm_nt_acc(g, tp.value(ib), tp.grad(ia));
                    if (tp.requires_grad(ib)) gemm_tn_acc(tp.value(ia), g, tp.grad(ib));
                  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const std::array<std::size_t, 1> in{a.id()};
  return t.record(medattn::transpose(a.value()), in, [ia = a.id()](Tape& tp, std::size_t self) {
    add_into(tp.grad(ia), medattn::transpose(tp.grad(self)));
  });
}

namespace {

Var add_or_sub(Var a, Var b, double sign) {
  Tape& t = same_tape(a, b);
  const std::array<std::size_t, 2> in{a.id(), b.id()};
  const bool broadcast = a.value().shape() != b.value().shape();
  Tensor out = elementwise(sign > 0 ? ElementwiseOp::add : ElementwiseOp::sub, a.value(),
                           b.value());
  return t.record(std::move(out), in,
                  [ia = a.id(), ib = b.id(), broadcast, sign](Tape& tp, std::size_t self) {
                    const Tensor& g = tp.grad(self);
                    if (tp.requires_grad(ia)) add_into(tp.grad(ia), g);
                    if (!tp.requires_grad(ib)) return;
                    Tensor& gb = tp.grad(ib);
                    if (!broadcast) {
                      auto d = gb.data();
                      auto s = g.data();
                      for (std::size_t i = 0; i < d.size(); ++i) d[i] += sign * s[i];
                      return;
                    }
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                      auto row = g.row(r);
                      for (std::size_t j = 0; j < row.size(); ++j) gb[j] += sign * row[j];
                    }
                  });
}

}  // namespace

Var add(Var a, Var b) { return add_or_sub(a, b, 1.0); }
Var sub(Var a, Var b) { return add_or_sub(a, b, -1.0); }

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (a.value().shape() != b.value().shape()) {
    throw ShapeError("mul: shapes differ, " + shape_string(a.value().shape()) + " vs " +
                     shape_string(b.value().shape()));
  }
  const std::array<std::size_t, 2> in{a.id(), b.id()};
  return t.record(elementwise(ElementwiseOp::mul, a.value(), b.value()), in,
                  [ia = a.id(), ib = b.id()](Tape& tp, std::size_t self) {
                    const Tensor& g = tp.grad(self);
                    if (tp.requires_grad(ia))
                      add_into(tp.grad(ia), elementwise(ElementwiseOp::mul, g, tp.value(ib)));
                    if (tp.requires_grad(ib))
                      add_into(tp.grad(ib), elementwise(ElementwiseOp::mul, g, tp.value(ia)));
                  });
}

Var scale(Var a, double factor) {
  Tape& t = tape_of(a);
  const std::array<std::size_t, 1> in{a.id()};
  return t.record(medattn::scale(a.value(), factor), in,
                  [ia = a.id(), factor](Tape& tp, std::size_t self) {
                    auto d = tp.grad(ia).data();
                    auto s = tp.grad(self).data();
                    for (std::size_t i = 0; i < d.size(); ++i) d[i] += factor * s[i];
                  });
}

Var softmax_rows(Var a) {
  Tape& t = tape_of(a);
  const std::array<std::size_t, 1> in{a.id()};
  return t.record(medattn::softmax_rows(a.value()), in, [ia = a.id()](Tape& tp, std::size_t self) {
    const Tensor& y = tp.value(self);
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      auto yr = y.row(r);
      auto gr = g.row(r);
      double dot = 0.0;
      for (std::size_t j = 0; j < yr.size(); ++j) dot += yr[j] * gr[j];
      auto dr = ga.row(r);
      for (std::size_t j = 0; j < yr.size(); ++j) dr[j] += yr[j] * (gr[j] - dot);
    }
  });
}

Var sigmoid(Var a) {
  Tape& t = tape_of(a);
  const std::array<std::size_t, 1> in{a.id()};
  return t.record(medattn::sigmoid(a.value()), in, [ia = a.id()](Tape& tp, std::size_t self) {
    auto y = tp.value(self).data();
    auto g = tp.grad(self).data();
    auto d = tp.grad(ia).data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var relu(Var a) {
  Tape& t = tape_of(a);
  const std::array<std::size_t, 1> in{a.id()};
  return t.record(medattn::relu(a.value()), in, [ia = a.id()](Tape& tp, std::size_t self) {
    auto x = tp.value(ia).data();
    auto g = tp.grad(self).data();
    auto d = tp.grad(ia).data();
    for (std::size_t i = 0; i < d.size(); ++i)
      if (x[i] > 0.0) d[i] += g[i];
  });
}

Var layer_norm(Var a, Var gamma, Var beta, double eps) {
  Tape& t = same_tape(a, gamma);
  same_tape(a, beta);
  const Tensor& x = a.value();
  const Tensor& gm = gamma.value();
  const std::size_t n = x.rows(), d = x.cols();
  if (gm.size() != d || beta.value().size() != d) {
    throw ShapeError("layer_norm: gamma/beta must have " + std::to_string(d) + " entries");
  }
  // Normalized activations and per-row 1/std are kept for the backward pass.
  Tensor x_hat = Tensor::zeros(x.shape());
  std::vector<double> inv_std(n);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = x.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    auto h = x_hat.row(r);
    for (std::size_t j = 0; j < d; ++j) h[j] = (row[j] - mean) * inv_std[r];
  }
  Tensor out = x_hat;
  const Tensor& bt = beta.value();
  for (std::size_t r = 0; r < n; ++r) {
    auto o = out.row(r);
    for (std::size_t j = 0; j < d; ++j) o[j] = gm[j] * o[j] + bt[j];
  }
  const std::array<std::size_t, 3> in{a.id(), gamma.id(), beta.id()};
  return t.record(
      std::move(out), in,
      [ia = a.id(), ig = gamma.id(), ib = beta.id(), x_hat = std::move(x_hat),
       inv_std = std::move(inv_std)](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        const Tensor& gm = tp.value(ig);
        const std::size_t n = g.rows(), d = g.cols();
        if (tp.requires_grad(ig)) {
          Tensor& gg = tp.grad(ig);
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t j = 0; j < d; ++j) gg[j] += g(r, j) * x_hat(r, j);
        }
        if (tp.requires_grad(ib)) {
          Tensor& gb = tp.grad(ib);
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t j = 0; j < d; ++j) gb[j] += g(r, j);
        }
        if (!tp.requires_grad(ia)) return;
        Tensor& ga = tp.grad(ia);
        std::vector<double> dxh(d);
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t r = 0; r < n; ++r) {
          double sum_dxh = 0.0, sum_dxh_xh = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            dxh[j] = g(r, j) * gm[j];
            sum_dxh += dxh[j];
            sum_dxh_xh += dxh[j] * x_hat(r, j);
          }
          for (std::size_t j = 0; j < d; ++j) {
            ga(r, j) += inv_std[r] * inv_d *
                        (static_cast<double>(d) * dxh[j] - sum_dxh - x_hat(r, j) * sum_dxh_xh);
          }
        }
      });
}

Var concat_last(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_last: no parts");
  Tape& t = tape_of(parts[0]);
  std::vector<Tensor> values;
  std::vector<std::size_t> ids;
  values.reserve(parts.size());
  for (const Var& p : parts) {
    same_tape(parts[0], p);
    values.push_back(p.value());
    ids.push_back(p.id());
  }
  return t.record(medattn::concat_last(values), ids, [ids](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    std::size_t offset = 0;
    for (auto id : ids) {
      const std::size_t w = tp.value(id).cols();
      if (tp.requires_grad(id)) {
        Tensor& gp = tp.grad(id);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          auto src = g.row(r).subspan(offset, w);
          auto dst = gp.row(r);
          for (std::size_t j = 0; j < w; ++j) dst[j] += src[j];
        }
      }
      offset += w;
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t width) {
  Tape& t = tape_of(a);
  const std::array<std::size_t, 1> in{a.id()};
  return t.record(medattn::slice_cols(a.value(), begin, width), in,
                  [ia = a.id(), begin, width](Tape& tp, std::size_t self) {
                    const Tensor& g = tp.grad(self);
                    Tensor& ga = tp.grad(ia);
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                      auto src = g.row(r);
                      auto dst = ga.row(r).subspan(begin, width);
                      for (std::size_t j = 0; j < width; ++j) dst[j] += src[j];
                    }
                  });
}

Var mean_pool_masked(Var a, std::span<const std::uint8_t> mask) {
  Tape& t = tape_of(a);
  const std::array<std::size_t, 1> in{a.id()};
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  Tensor out = medattn::mean_pool_masked(a.value(), mask);
  std::size_t count = 0;
  for (auto v : m) count += v ? 1 : 0;
  return t.record(std::move(out), in,
                  [ia = a.id(), m = std::move(m), count](Tape& tp, std::size_t self) {
                    const Tensor& g = tp.grad(self);
                    Tensor& ga = tp.grad(ia);
                    const double inv = 1.0 / static_cast<double>(count);
                    for (std::size_t r = 0; r < m.size(); ++r) {
                      if (!m[r]) continue;
                      auto dst = ga.row(r);
                      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += g[j] * inv;
                    }
                  });
}

Var gather_rows(Var table, std::span<const std::int32_t> ids) {
  Tape& t = tape_of(table);
  const Tensor& tbl = table.value();
  if (tbl.rank() != 2) throw ShapeError("gather_rows: table must be rank 2");
  if (ids.empty()) throw ShapeError("gather_rows: no ids");
  Tensor out = Tensor::zeros({ids.size(), tbl.cols()});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= tbl.rows()) {
      throw DataError("gather_rows: id " + std::to_string(ids[i]) + " outside table of " +
                      std::to_string(tbl.rows()) + " rows");
    }
    auto src = tbl.row(static_cast<std::size_t>(ids[i]));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  const std::array<std::size_t, 1> in{table.id()};
  return t.record(std::move(out), in,
                  [it = table.id(), idv = std::vector<std::int32_t>(ids.begin(), ids.end())](
                      Tape& tp, std::size_t self) {
                    const Tensor& g = tp.grad(self);
                    Tensor& gt = tp.grad(it);
                    for (std::size_t i = 0; i < idv.size(); ++i) {
                      auto src = g.row(i);
                      auto dst = gt.row(static_cast<std::size_t>(idv[i]));
                      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
                    }
                  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  const std::array<std::size_t, 1> in{a.id()};
  return t.record(Tensor({1}, {medattn::sum(a.value())}), in,
                  [ia = a.id()](Tape& tp, std::size_t self) {
                    const double g = tp.grad(self)[0];
                    for (double& v : tp.grad(ia).data()) v += g;
                  });
}

}  // namespace ad

}  // namespace medattn
