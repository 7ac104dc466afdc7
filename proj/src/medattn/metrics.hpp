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

// Multi-label evaluation. All counts are micro-accumulated over every
// (example, label) cell.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "medattn/tensor.hpp"
#include "medattn/text_pipeline.hpp"

namespace medattn {

/// Row-major 0/1 matrix, [rows x cols].
struct LabelMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> cells;

  std::uint8_t at(std::size_t r, std::size_t c) const { return cells[r * cols + c]; }
  friend bool operator==(const LabelMatrix&, const LabelMatrix&) = default;
};

/// pred = 1 iff prob >= threshold. Requires threshold in (0, 1).
LabelMatrix binarize(const Tensor& probs, double threshold);
/// Gold labels of `examples` stacked into a matrix.
LabelMatrix gold_matrix(std::span<const EncodedExample> examples);

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept;
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Throws ShapeError when the shapes differ.
ConfusionCounts confusion_counts(const LabelMatrix& pred, const LabelMatrix& gold);
/// One ConfusionCounts per label column.
std::vector<ConfusionCounts> per_label_counts(const LabelMatrix& pred, const LabelMatrix& gold);

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  // Set when the matching denominator was zero and the value defaulted to 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  ConfusionCounts counts;
  std::vector<ConfusionCounts> per_label;

  double f1() const noexcept;
};

/// Requires c.total() > 0 (UsageError otherwise).
MetricsReport compute_metrics(const ConfusionCounts& c);
/// binarize, count, compute; per_label is filled.
MetricsReport evaluate(const Tensor& probs, const LabelMatrix& gold, double threshold);

struct NamedReport {
  std::string name;
  MetricsReport report;
};

/// Up to 6 significant digits; values below 1 in magnitude switch to the
/// shortest scientific form when that is shorter (1e-4 -> "1e-4").
std::string format_number(double v);

/// Percentage with one decimal, rounded half-up: 0.7785 -> "77.9".
std::string format_percent(double fraction);

/// Header line `Method  Accuracy  Precision  Recall`, then one row per report:
/// the name left-aligned to the longest name, then the three percentages
/// right-aligned to the widest value, columns separated by two spaces.
std::string format_report(std::span<const NamedReport> reports);

/// `method,accuracy,precision,recall` plus one row per report.
std::string metrics_csv(std::span<const NamedReport> reports);
void write_metrics_csv(const std::filesystem::path& path, std::span<const NamedReport> reports);

}  // namespace medattn
