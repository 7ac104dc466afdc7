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

#include <algorithm>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "medattn/errors.hpp"
#include "medattn/metrics.hpp"
#include "test_support.hpp"

using namespace medattn;

namespace {

LabelMatrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  LabelMatrix m{rows, cols, std::vector<std::uint8_t>(rows * cols)};
  for (auto& c : m.cells) c = rng() % 3 == 0;
  return m;
}

MetricsReport report(double a, double p, double r) {
  MetricsReport m;
  m.accuracy = a;
  m.precision = p;
  m.recall = r;
  return m;
}

}  // namespace

TEST_CASE("binarize") {
  const Tensor probs({2, 3}, {0.5, 0.49, 0.51, 0.9, 0.1, 0.5});
  const LabelMatrix b = binarize(probs, 0.5);
  CHECK(b.cells == std::vector<std::uint8_t>{1, 0, 1, 1, 0, 1});
  CHECK(binarize(Tensor::filled({2, 2}, 0.5), 0.5).cells == std::vector<std::uint8_t>(4, 1));
  CHECK_THROWS_AS(binarize(probs, 0.0), UsageError);
  CHECK_THROWS_AS(binarize(probs, 1.0), UsageError);

  std::mt19937_64 rng(1);
  const Tensor r({20, 5}, medattn_test::uniform_values(100, 2, 0.0, 1.0));
  for (double lo = 0.05; lo < 0.95; lo += 0.1) {
    const auto a = binarize(r, lo), b2 = binarize(r, lo + 0.05);
    for (std::size_t i = 0; i < a.cells.size(); ++i) CHECK(b2.cells[i] <= a.cells[i]);
  }
}

TEST_CASE("confusion_counts") {
  std::mt19937_64 rng(4);
  const LabelMatrix g = random_matrix(7, 4, rng);
  const auto same = confusion_counts(g, g);
  CHECK(same.fp == 0);
  CHECK(same.fn == 0);
  LabelMatrix ones{7, 4, std::vector<std::uint8_t>(28, 1)};
  LabelMatrix zeros{7, 4, std::vector<std::uint8_t>(28, 0)};
  CHECK(confusion_counts(ones, zeros).fp == 28);
  CHECK(confusion_counts(ones, g).total() == 28);
  CHECK_THROWS_AS(confusion_counts(ones, LabelMatrix{4, 7, std::vector<std::uint8_t>(28, 0)}), ShapeError);

  const auto per = per_label_counts(ones, g);
  REQUIRE(per.size() == 4);
  ConfusionCounts sum;
  for (const auto& c : per) sum += c;
  CHECK(sum == confusion_counts(ones, g));
}

TEST_CASE("compute_metrics") {
  const auto m = compute_metrics({3, 1, 1, 5});
  CHECK(m.precision == 0.75);
  CHECK(m.recall == 0.75);
  CHECK(m.accuracy == 0.8);
  CHECK(m.f1() == doctest::Approx(0.75));

  const auto empty = compute_metrics({0, 0, 0, 9});
  CHECK(empty.precision == 0.0);
  CHECK(empty.recall == 0.0);
  CHECK(empty.accuracy == 1.0);
  CHECK(empty.precision_undefined);
  CHECK(empty.recall_undefined);

  const auto perfect = compute_metrics({4, 0, 0, 6});
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(!perfect.precision_undefined);

  CHECK_THROWS_AS(compute_metrics({0, 0, 0, 0}), UsageError);

  // monotone in TP with the other denominator term fixed
  for (std::uint64_t tp = 0; tp < 10; ++tp) {
    CHECK(compute_metrics({tp + 1, 3, 2, 1}).precision >= compute_metrics({tp, 3, 2, 1}).precision);
    CHECK(compute_metrics({tp + 1, 3, 2, 1}).recall >= compute_metrics({tp, 3, 2, 1}).recall);
  }
}

TEST_CASE("metrics agree with a per-cell recount and ignore row order") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const LabelMatrix pred = random_matrix(10, 6, rng);
    const LabelMatrix gold = random_matrix(10, 6, rng);
    double agree = 0, tp = 0, pp = 0, gp = 0;
    for (std::size_t r = 0; r < 10; ++r)
      for (std::size_t c = 0; c < 6; ++c) {
        const bool p = pred.at(r, c), g = gold.at(r, c);
        agree += p == g;
        tp += p && g;
        pp += p;
        gp += g;
      }
    const auto m = compute_metrics(confusion_counts(pred, gold));
    CHECK(m.accuracy == doctest::Approx(agree / 60.0).epsilon(1e-15));
    CHECK(m.precision == doctest::Approx(pp > 0 ? tp / pp : 0.0).epsilon(1e-15));
    CHECK(m.recall == doctest::Approx(gp > 0 ? tp / gp : 0.0).epsilon(1e-15));

    std::vector<std::size_t> perm(10);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    LabelMatrix pp2 = pred, gg2 = gold;
    for (std::size_t r = 0; r < 10; ++r)
      for (std::size_t c = 0; c < 6; ++c) {
        pp2.cells[r * 6 + c] = pred.at(perm[r], c);
        gg2.cells[r * 6 + c] = gold.at(perm[r], c);
      }
    const auto m2 = compute_metrics(confusion_counts(pp2, gg2));
    CHECK(m2.accuracy == m.accuracy);
    CHECK(m2.precision == m.precision);
    CHECK(m2.recall == m.recall);
  }
}

TEST_CASE("evaluate") {
  const Tensor probs({2, 2}, {0.9, 0.2, 0.6, 0.7});
  const LabelMatrix gold{2, 2, {1, 0, 0, 1}};
  const auto m = evaluate(probs, gold, 0.5);
  CHECK(m.counts == ConfusionCounts{2, 1, 0, 1});
  CHECK(m.per_label.size() == 2);
  const std::vector<EncodedExample> ex = {{{2}, {1}, {1, 0}}, {{3}, {1}, {0, 1}}};
  CHECK(gold_matrix(ex) == gold);
}

TEST_CASE("report formatting") {
  CHECK(format_percent(0.7785) == "77.9");
  CHECK(format_percent(0.778) == "77.8");
  CHECK(format_percent(0.0) == "0.0");
  CHECK(format_percent(1.0) == "100.0");

  const NamedReport ours[] = {{"Ours", report(0.778, 0.759, 0.732)}};
  const std::string table = format_report(ours);
  CHECK(table.find("\nOurs  77.8  75.9  73.2\n") != std::string::npos);
  CHECK(table.rfind("Method", 0) == 0);

  const NamedReport zero[] = {{"X", report(0, 0, 0)}};
  CHECK(format_report(zero).find("0.0  0.0  0.0") != std::string::npos);

  const NamedReport wide[] = {{"Ours", report(0.778, 0.759, 0.732)}, {"All", report(1.0, 1.0, 1.0)}};
  CHECK(format_report(wide) ==
        "Method  Accuracy  Precision  Recall\n"
        "Ours   77.8   75.9   73.2\n"
        "All   100.0  100.0  100.0\n");

  const NamedReport two[] = {{"Ours", report(0.778, 0.759, 0.732)}, {"BoW", report(0.5, 0.25, 1.0)}};
  CHECK(metrics_csv(two) == "method,accuracy,precision,recall\nOurs,0.778,0.759,0.732\nBoW,0.5,0.25,1\n");

  CHECK(format_number(1e-4) == "1e-4");
  CHECK(format_number(0.25) == "0.25");
  CHECK(format_number(123.5) == "123.5");
}
