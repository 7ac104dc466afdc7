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

#include "medattn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "medattn/errors.hpp"

namespace medattn {

namespace {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 1 && t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected rank 1 or 2, got shape " +
                     shape_string(t.shape()));
  }
}

// Output shape of a product with `rows` rows; rank-1 lhs stays rank 1.
Shape product_shape(const Tensor& lhs, std::size_t rows, std::size_t cols) {
  if (lhs.rank() == 1) return {cols};
  return {rows, cols};
}

bool is_row_of(const Tensor& b, const Tensor& a) {
  return b.rows() == 1 && b.cols() == a.cols() && a.rank() == 2;
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.empty()) throw ShapeError("tensor shape must have at least one dimension");
  for (auto d : shape_) {
    if (d == 0) throw ShapeError("tensor dimensions must be >= 1, got " + shape_string(shape_));
  }
  const auto expected = element_count(shape_);
  if (expected != data_.size()) {
    throw ShapeError("tensor shape " + shape_string(shape_) + " needs " +
                     std::to_string(expected) + " elements, data has " +
                     std::to_string(data_.size()));
  }
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  const auto n = element_count(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

bool Tensor::bitwise_equal(const Tensor& other) const noexcept {
  return shape_ == other.shape_ &&
         (data_.empty() ||
          std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0);
}

// --- products ---------------------------------------------------------------

// Kernels are cloned for AVX2 where available. Only the independent output
// columns are vectorized; every output element is summed in the same order
// by every clone, and FMA contraction is disabled for this library, so
// results do not depend on the clone chosen.
#if defined(__x86_64__) && defined(__GNUC__) && !defined(__clang__)
#define MEDATTN_KERNEL __attribute__((target_clones("avx2", "default")))
#else
#define MEDATTN_KERNEL
#endif

namespace {

MEDATTN_KERNEL void axpy_rows(std::size_t n, std::size_t k, std::size_t p, const double* __restrict A,
                              const double* __restrict B, double* __restrict C) {
  for (std::size_t i = 0; i < n; ++i) {
    double* __restrict c_row = C + i * p;
    for (std::size_t t = 0; t < k; ++t) {
      const double a_it = A[i * k + t];
      if (a_it == 0.0) continue;
      const double* __restrict b_row = B + t * p;
      for (std::size_t j = 0; j < p; ++j) c_row[j] += a_it * b_row[j];
    }
  }
}

MEDATTN_KERNEL void dot_rows(std::size_t n, std::size_t k, std::size_t p, const double* __restrict A,
                             const double* __restrict BT, double* __restrict acc,
                             double* __restrict C) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) acc[j] = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
      const double a_it = A[i * k + t];
      if (a_it == 0.0) continue;
      const double* __restrict b_row = BT + t * p;
      for (std::size_t j = 0; j < p; ++j) acc[j] += a_it * b_row[j];
    }
    double* __restrict c_row = C + i * p;
    for (std::size_t j = 0; j < p; ++j) c_row[j] += acc[j];
  }
}

MEDATTN_KERNEL void outer_rows(std::size_t n, std::size_t k, std::size_t p, const double* __restrict A,
                               const double* __restrict B, double* __restrict C) {
  for (std::size_t r = 0; r < n; ++r) {
    const double* __restrict a_row = A + r * k;
    const double* __restrict b_row = B + r * p;
    for (std::size_t i = 0; i < k; ++i) {
      const double a_ri = a_row[i];
      if (a_ri == 0.0) continue;
      double* __restrict c_row = C + i * p;
      for (std::size_t j = 0; j < p; ++j) c_row[j] += a_ri * b_row[j];
    }
  }
}

}  // namespace

void gemm_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  axpy_rows(a.rows(), a.cols(), b.cols(), a.data().data(), b.data().data(), out.data().data());
}

void gemm_nt_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  // Each output is a dot product accumulated from zero in index order, then
  // added to out; streaming over a transposed copy keeps that order.
  const std::size_t k = a.cols(), p = b.rows();
  std::vector<double> bt(k * p);
  const double* B = b.data().data();
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t t = 0; t < k; ++t) bt[t * p + j] = B[j * k + t];
  std::vector<double> acc(p);
  dot_rows(a.rows(), k, p, a.data().data(), bt.data(), acc.data(), out.data().data());
}

void gemm_tn_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  outer_rows(a.rows(), a.cols(), b.cols(), a.data().data(), b.data().data(), out.data().data());
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows() || (b.rank() == 1 && a.cols() != 1)) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_string(a.shape()) +
                     " * " + shape_string(b.shape()));
  }
  Tensor out = Tensor::zeros(product_shape(a, a.rows(), b.cols()));
  gemm_acc(a, b, out);
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: column counts differ, " + shape_string(a.shape()) +
                     " * " + shape_string(b.shape()) + "^T");
  }
  Tensor out = Tensor::zeros(product_shape(a, a.rows(), b.rows()));
  gemm_nt_acc(a, b, out);
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_tn");
  require_matrix(b, "matmul_tn");
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: row counts differ, " + shape_string(a.shape()) +
                     "^T * " + shape_string(b.shape()));
  }
  Tensor out = Tensor::zeros({a.cols(), b.cols()});
  gemm_tn_acc(a, b, out);
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) {
    throw ShapeError("transpose: expected rank 2, got shape " + shape_string(a.shape()));
  }
  const std::size_t n = a.rows(), k = a.cols();
  Tensor out = Tensor::zeros({k, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) out(j, i) = a(i, j);
  return out;
}

// --- elementwise ------------------------------------------------------------

Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    Tensor out = a;
    auto o = out.data();
    auto bd = b.data();
    switch (op) {
      case ElementwiseOp::add:
        for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
        break;
      case ElementwiseOp::sub:
        for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bd[i];
        break;
      case ElementwiseOp::mul:
        for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bd[i];
        break;
    }
    return out;
  }
  if (op != ElementwiseOp::mul && is_row_of(b, a)) {
    Tensor out = a;
    const double sign = op == ElementwiseOp::add ? 1.0 : -1.0;
    auto bd = b.data();
    for (std::size_t r = 0; r < out.rows(); ++r) {
      auto row = out.row(r);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] += sign * bd[j];
    }
    return out;
  }
  throw ShapeError("elementwise: incompatible shapes " + shape_string(a.shape()) + " and " +
                   shape_string(b.shape()));
}

Tensor elementwise_scalar(ElementwiseOp op, const Tensor& a, double b) {
  Tensor out = a;
  for (double& v : out.data()) {
    switch (op) {
      case ElementwiseOp::add: v += b; break;
      case ElementwiseOp::sub: v -= b; break;
      case ElementwiseOp::mul: v *= b; break;
    }
  }
  return out;
}

Tensor scale(const Tensor& a, double factor) {
  return elementwise_scalar(ElementwiseOp::mul, a, factor);
}

// --- nonlinearities ---------------------------------------------------------

Tensor softmax_rows(const Tensor& a) {
  require_matrix(a, "softmax_rows");
  Tensor out = a;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : row) {
      if (std::isnan(v)) throw NumericError("softmax_rows: NaN in row " + std::to_string(r));
      mx = std::max(mx, v);
    }
    if (mx == -std::numeric_limits<double>::infinity()) {
      throw NumericError("softmax_rows: row " + std::to_string(r) + " is entirely masked");
    }
    double total = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      total += v;
    }
    const double inv = 1.0 / total;
    for (double& v : row) v *= inv;
  }
  return out;
}

double sigmoid(double x) noexcept {
  // Largest double below 1, so that saturated outputs stay inside (0, 1).
  static const double kUpper = std::nextafter(1.0, 0.0);
  double s;
  if (x >= 0.0) {
    s = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    s = e / (1.0 + e);
  }
  if (s > kUpper) s = kUpper;
  if (s <= 0.0) s = std::numeric_limits<double>::denorm_min();
  return s;
}

Tensor sigmoid(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data()) v = sigmoid(v);
  return out;
}

Tensor relu(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor layer_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta, double eps) {
  require_matrix(a, "layer_norm");
  const std::size_t d = a.cols();
  if (gamma.size() != d || beta.size() != d) {
    throw ShapeError("layer_norm: gamma/beta must have " + std::to_string(d) + " entries");
  }
  Tensor out = a;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) row[j] = gamma[j] * ((row[j] - mean) * inv_std) + beta[j];
  }
  return out;
}

// --- structural -------------------------------------------------------------

Tensor concat_last(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_last: no parts");
  const std::size_t n = parts[0].rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_last");
    if (p.rows() != n) {
      throw ShapeError("concat_last: row counts differ (" + std::to_string(n) + " vs " +
                       std::to_string(p.rows()) + ")");
    }
    total += p.cols();
  }
  Tensor out = Tensor::zeros(parts[0].rank() == 1 ? Shape{total} : Shape{n, total});
  for (std::size_t r = 0; r < n; ++r) {
    auto dst = out.row(r);
    std::size_t offset = 0;
    for (const auto& p : parts) {
      auto src = p.row(r);
      std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(offset));
      offset += p.cols();
    }
  }
  return out;
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t width) {
  require_matrix(a, "slice_cols");
  if (width == 0 || begin + width > a.cols()) {
    throw ShapeError("slice_cols: columns [" + std::to_string(begin) + ", " +
                     std::to_string(begin + width) + ") out of range for " +
                     shape_string(a.shape()));
  }
  Tensor out = Tensor::zeros(a.rank() == 1 ? Shape{width} : Shape{a.rows(), width});
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto src = a.row(r).subspan(begin, width);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

std::vector<Tensor> split_cols(const Tensor& a, std::size_t parts) {
  if (parts == 0 || a.cols() % parts != 0) {
    throw ShapeError("split_cols: " + std::to_string(a.cols()) +
                     " columns not divisible into " + std::to_string(parts) + " parts");
  }
  const std::size_t w = a.cols() / parts;
  std::vector<Tensor> out;
  out.reserve(parts);
  for (std::size_t i = 0; i < parts; ++i) out.push_back(slice_cols(a, i * w, w));
  return out;
}

Tensor mean_pool_masked(const Tensor& a, std::span<const std::uint8_t> mask) {
  require_matrix(a, "mean_pool_masked");
  if (mask.size() != a.rows()) {
    throw ShapeError("mean_pool_masked: mask length " + std::to_string(mask.size()) +
                     " != row count " + std::to_string(a.rows()));
  }
  Tensor out = Tensor::zeros({a.cols()});
  std::size_t count = 0;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    if (!mask[r]) continue;
    ++count;
    auto src = a.row(r);
    for (std::size_t j = 0; j < src.size(); ++j) out[j] += src[j];
  }
  if (count == 0) throw NumericError("mean_pool_masked: mask selects no rows");
  const double inv = 1.0 / static_cast<double>(count);
  for (double& v : out.data()) v *= inv;
  return out;
}

double sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return total;
}

}  // namespace medattn
