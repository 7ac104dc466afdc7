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

#include "medattn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "medattn/errors.hpp"

namespace medattn {

LabelMatrix binarize(const Tensor& probs, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw UsageError("binarize: threshold must lie in (0, 1)");
  LabelMatrix out;
  out.rows = probs.rows();
  out.cols = probs.cols();
  out.cells.reserve(probs.size());
  for (double p : probs.data()) out.cells.push_back(p >= threshold ? 1 : 0);
  return out;
}

LabelMatrix gold_matrix(std::span<const EncodedExample> examples) {
  LabelMatrix out;
  out.rows = examples.size();
  out.cols = examples.empty() ? 0 : examples.front().labels.size();
  out.cells.reserve(out.rows * out.cols);
  for (const auto& ex : examples) {
    if (ex.labels.size() != out.cols) throw ShapeError("gold_matrix: ragged label vectors");
    out.cells.insert(out.cells.end(), ex.labels.begin(), ex.labels.end());
  }
  return out;
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) noexcept {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

namespace {

void check_same_shape(const LabelMatrix& pred, const LabelMatrix& gold) {
  if (pred.rows != gold.rows || pred.cols != gold.cols)
    throw ShapeError("confusion_counts: prediction is [" + std::to_string(pred.rows) + " x " +
                     std::to_string(pred.cols) + "], gold is [" + std::to_string(gold.rows) +
                     " x " + std::to_string(gold.cols) + "]");
}

void count_cell(ConfusionCounts& c, std::uint8_t p, std::uint8_t g) {
  if (p && g) ++c.tp;
  else if (p) ++c.fp;
  else if (g) ++c.fn;
  else ++c.tn;
}

}  // namespace

ConfusionCounts confusion_counts(const LabelMatrix& pred, const LabelMatrix& gold) {
  check_same_shape(pred, gold);
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.cells.size(); ++i) count_cell(c, pred.cells[i], gold.cells[i]);
  return c;
}

std::vector<ConfusionCounts> per_label_counts(const LabelMatrix& pred, const LabelMatrix& gold) {
  check_same_shape(pred, gold);
  std::vector<ConfusionCounts> out(pred.cols);
  for (std::size_t r = 0; r < pred.rows; ++r)
    for (std::size_t c = 0; c < pred.cols; ++c) count_cell(out[c], pred.at(r, c), gold.at(r, c));
  return out;
}

double MetricsReport::f1() const noexcept {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

MetricsReport compute_metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw UsageError("compute_metrics: no cells to score");
  MetricsReport r;
  r.counts = c;
  r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  if (c.tp + c.fp > 0) r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  else r.precision_undefined = true;
  if (c.tp + c.fn > 0) r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  else r.recall_undefined = true;
  return r;
}

MetricsReport evaluate(const Tensor& probs, const LabelMatrix& gold, double threshold) {
  const LabelMatrix pred = binarize(probs, threshold);
  MetricsReport r = compute_metrics(confusion_counts(pred, gold));
  r.per_label = per_label_counts(pred, gold);
  return r;
}

std::string format_number(double v) {
  char fixed[64];
  std::snprintf(fixed, sizeof fixed, "%.6g", v);
  std::string best = fixed;
  if (!std::isfinite(v) || v == 0.0 || std::fabs(v) >= 1.0) return best;
  const double target = std::strtod(fixed, nullptr);
  for (int digits = 0; digits < 6; ++digits) {
    char sci[64];
    std::snprintf(sci, sizeof sci, "%.*e", digits, v);
    if (std::strtod(sci, nullptr) != target) continue;
    // "1.50e-04" -> "1.5e-4"
    std::string s = sci;
    const auto e = s.find('e');
    std::string mantissa = s.substr(0, e);
    if (mantissa.find('.') != std::string::npos) {
      while (mantissa.back() == '0') mantissa.pop_back();
      if (mantissa.back() == '.') mantissa.pop_back();
    }
    const int exponent = std::atoi(s.c_str() + e + 1);
    const std::string compact = mantissa + "e" + std::to_string(exponent);
    if (compact.size() < best.size()) best = compact;
    break;
  }
  return best;
}

std::string format_percent(double fraction) {
  // The epsilon keeps decimal midpoints such as 0.7785, stored slightly
  // below the midpoint, rounding upward.
  const double tenths = std::floor(fraction * 1000.0 + 0.5 + 1e-9);
  const auto t = static_cast<long long>(tenths);
  const long long whole = t / 10;
  const long long frac = t % 10;
  return (t < 0 ? "-" : "") + std::to_string(std::llabs(whole)) + "." +
         std::to_string(std::llabs(frac));
}

std::string format_report(std::span<const NamedReport> reports) {
  if (reports.empty()) throw UsageError("format_report: no reports");
  struct Row {
    std::string name, acc, prec, rec;
  };
  std::vector<Row> rows;
  std::size_t value_w = 0;
  for (const auto& r : reports) {
    rows.push_back({r.name, format_percent(r.report.accuracy), format_percent(r.report.precision),
                    format_percent(r.report.recall)});
    for (const auto* v : {&rows.back().acc, &rows.back().prec, &rows.back().rec})
      value_w = std::max(value_w, v->size());
  }
  auto pad_right = [](const std::string& s, std::size_t w) { return s + std::string(w - s.size(), ' '); };
  auto pad_left = [](const std::string& s, std::size_t w) { return std::string(w - s.size(), ' ') + s; };

  // Row names only pad to the longest row name so a lone "Ours" row stays
  // compact; the header line is not column-aligned with the rows.
  std::size_t row_name_w = 0;
  for (const auto& r : rows) row_name_w = std::max(row_name_w, r.name.size());

  std::ostringstream out;
  out << "Method  Accuracy  Precision  Recall\n";
  for (const auto& r : rows)
    out << pad_right(r.name, row_name_w) << "  " << pad_left(r.acc, value_w) << "  "
        << pad_left(r.prec, value_w) << "  " << pad_left(r.rec, value_w) << "\n";
  return out.str();
}

std::string metrics_csv(std::span<const NamedReport> reports) {
  std::ostringstream out;
  out << "method,accuracy,precision,recall\n";
  for (const auto& r : reports)
    out << r.name << "," << format_number(r.report.accuracy) << "," << format_number(r.report.precision)
        << "," << format_number(r.report.recall) << "\n";
  return out.str();
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const NamedReport> reports) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << metrics_csv(reports);
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace medattn
