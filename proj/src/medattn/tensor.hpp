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
#include <span>
#include <string>
#include <vector>

namespace medattn {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

/// Dense row-major tensor of doubles, rank 1 or 2.
///
/// Rank-1 tensors behave as a single row wherever a matrix is expected
/// (rows() == 1), which is how bias vectors and pooled representations
/// enter matrix products.
class Tensor {
 public:
  Tensor() = default;
  /// Throws ShapeError when the element count differs from the product of
  /// `shape`, or when any dimension is zero.
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor zeros_like(const Tensor& other) { return zeros(other.shape_); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t rows() const noexcept { return shape_.size() == 2 ? shape_[0] : 1; }
  std::size_t cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols(), cols());
  }
  std::span<double> row(std::size_t r) {
    return std::span<double>(data_).subspan(r * cols(), cols());
  }

  bool all_finite() const noexcept;

  /// Bitwise comparison of shape and every element.
  bool bitwise_equal(const Tensor& other) const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Value-level kernels. The differentiable versions in autodiff.hpp are built
// on these.

Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
/// a^T * b
Tensor matmul_tn(const Tensor& a, const Tensor& b);
/// out += a * b (accumulating, shapes must already agree)
void gemm_acc(const Tensor& a, const Tensor& b, Tensor& out);
/// out += a * b^T
void gemm_nt_acc(const Tensor& a, const Tensor& b, Tensor& out);
/// out += a^T * b
void gemm_tn_acc(const Tensor& a, const Tensor& b, Tensor& out);

Tensor transpose(const Tensor& a);

enum class ElementwiseOp { add, sub, mul };

/// Tensor-tensor elementwise op. `b` must have the same shape as `a`, or be a
/// single row (rank 1 of length a.cols(), or 1 x a.cols()) broadcast over
/// a's rows. Broadcasting is supported for add and sub only.
Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b);
/// Tensor-scalar op; `scale` multiplies, add/sub offset every entry.
Tensor elementwise_scalar(ElementwiseOp op, const Tensor& a, double b);
Tensor scale(const Tensor& a, double factor);

/// Row-wise softmax with max subtraction. -inf entries receive weight exactly
/// 0. Throws NumericError on NaN input or a row that is entirely -inf.
Tensor softmax_rows(const Tensor& a);

/// 1 / (1 + exp(-x)), evaluated in a form that never overflows.
double sigmoid(double x) noexcept;
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);

/// Per-row normalization to zero mean / unit population variance, then
/// gamma * x_hat + beta.
Tensor layer_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

/// Column-wise concatenation of parts that share a row count.
Tensor concat_last(std::span<const Tensor> parts);
/// Columns [begin, begin + width) of a.
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t width);
/// Split into equal-width column blocks (inverse of concat_last).
std::vector<Tensor> split_cols(const Tensor& a, std::size_t parts);

/// Mean of the rows of `a` whose mask entry is nonzero. Returns a rank-1
/// tensor of length a.cols(). Throws when no mask entry is set.
Tensor mean_pool_masked(const Tensor& a, std::span<const std::uint8_t> mask);

double sum(const Tensor& a);

}  // namespace medattn
