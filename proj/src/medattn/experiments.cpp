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

#include "medattn/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "medattn/errors.hpp"

namespace medattn {

namespace {

constexpr const char* kCsvHeader = "sweep,value,accuracy,precision,recall,train_seconds,seed";

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

SweepResult make_row(std::string sweep, double value, const MetricsReport& r, double seconds,
                     std::uint64_t seed) {
  return {std::move(sweep), value, r.accuracy, r.precision, r.recall, seconds, seed};
}

void sort_values(std::vector<double>& values, const char* what) {
  if (values.empty()) throw UsageError(std::string(what) + ": no values to sweep");
  std::sort(values.begin(), values.end());
}

}  // namespace

std::vector<EncodedExample> ExperimentData::examples(std::span<const std::size_t> indices) const {
  std::vector<EncodedExample> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(corpus.entries.at(i).example);
  return out;
}

ExperimentData prepare_experiment(PreprocessedCorpus corpus, double test_fraction,
                                  std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw UsageError("test fraction must lie in (0, 1)");
  const std::size_t n = corpus.entries.size();
  const auto n_test = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(n) - 1e-9));
  if (n_test == 0 || n < n_test + 3)
    throw DataError("corpus of " + std::to_string(n) + " notes is too small to split");

  ExperimentData data;
  const auto order = shuffled(n, seed);
  data.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::sort(data.test.begin(), data.test.end());
  const std::vector<std::size_t> pool(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());

  const auto [train_pos, val_pos] = split_train_validation(pool.size(), seed);
  for (std::size_t p : val_pos) data.validation.push_back(pool[p]);
  std::sort(data.validation.begin(), data.validation.end());
  std::vector<std::size_t> train;
  for (std::size_t p : train_pos) train.push_back(pool[p]);
  std::sort(train.begin(), train.end());
  for (std::size_t p : shuffled(train.size(), seed ^ 0xf4ac7105ull)) data.train_order.push_back(train[p]);

  data.corpus = std::move(corpus);
  return data;
}

ModelConfig experiment_model(const ExperimentConfig& cfg, const ExperimentData& data) {
  ModelConfig m = cfg.model;
  m.vocab_size = data.corpus.vocab.size();
  m.n_labels = data.corpus.label_space.size();
  m.max_len = data.corpus.max_len;
  return m;
}

TrainedTransformer train_transformer(const ExperimentData& data, const ExperimentConfig& cfg,
                                     std::span<const std::size_t> train_indices) {
  const auto train_set = data.examples(train_indices);
  const auto val_set = data.examples(data.validation);
  const auto start = std::chrono::steady_clock::now();
  TrainedTransformer out;
  out.result = train(train_set, val_set, experiment_model(cfg, data), cfg.train);
  out.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

MetricsReport evaluate_model(const TrainableModel& model, std::span<const EncodedExample> examples,
                             double threshold) {
  return evaluate(predict_all(model, examples), gold_matrix(examples), threshold);
}

std::vector<SweepResult> lr_sweep(std::vector<double> rates, const ExperimentData& data,
                                  const ExperimentConfig& cfg) {
  sort_values(rates, "lr sweep");
  const auto test = data.examples(data.test);
  std::vector<SweepResult> out;
  for (double rate : rates) {
    ExperimentConfig point = cfg;
    point.train.learning_rate = rate;
    const auto trained = train_transformer(data, point, data.train_order);
    out.push_back(make_row("lr", rate, evaluate_model(trained.model(), test, cfg.train.threshold),
                           trained.train_seconds, cfg.train.seed));
  }
  return out;
}

std::vector<SweepResult> sample_fraction_sweep(std::vector<double> fractions,
                                               const ExperimentData& data,
                                               const ExperimentConfig& cfg) {
  sort_values(fractions, "sample sweep");
  const std::size_t n = data.train_order.size();
  std::vector<std::size_t> counts;
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw UsageError("sample sweep: fraction must lie in (0, 1]");
    // The epsilon keeps 0.3 * 1000 from rounding up to 301.
    const auto count = static_cast<std::size_t>(std::ceil(f * static_cast<double>(n) - 1e-9));
    if (count < 2 * cfg.train.batch_size) {
      char msg[160];
      std::snprintf(msg, sizeof msg,
                    "sample sweep: fraction %g keeps %zu examples, fewer than two batches of %zu", f,
                    count, cfg.train.batch_size);
      throw UsageError(msg);
    }
    counts.push_back(count);
  }
  const auto test = data.examples(data.test);
  std::vector<SweepResult> out;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const std::span<const std::size_t> subset(data.train_order.data(), counts[i]);
    const auto trained = train_transformer(data, cfg, subset);
    out.push_back(make_row("samples", fractions[i],
                           evaluate_model(trained.model(), test, cfg.train.threshold),
                           trained.train_seconds, cfg.train.seed));
  }
  return out;
}

std::vector<EncodedExample> perturbed_test_set(const ExperimentData& data, double level,
                                               NoiseKind kind, std::uint64_t seed) {
  const auto& tokens = data.corpus.vocab.tokens();
  // PAD and UNK are never substitutes.
  const std::vector<std::string> vocabulary(tokens.begin() + 2, tokens.end());
  std::vector<EncodedExample> out;
  out.reserve(data.test.size());
  for (std::size_t i : data.test) {
    const CorpusEntry& e = data.corpus.entries.at(i);
    const std::uint64_t s = seed + 0x9e3779b97f4a7c15ull * (i + 1);
    EncodedExample ex = encode(inject_noise(e.tokens, level, kind, s, vocabulary),
                               data.corpus.vocab, data.corpus.max_len);
    ex.labels = e.example.labels;
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<SweepResult> noise_sweep(std::vector<double> levels, NoiseKind kind,
                                     const ExperimentData& data, const ExperimentConfig& cfg) {
  sort_values(levels, "noise sweep");
  for (double l : levels)
    if (!(l >= 0.0 && l <= 1.0)) throw UsageError("noise sweep: level must lie in [0, 1]");
  const auto trained = train_transformer(data, cfg, data.train_order);
  const auto model = trained.model();
  std::vector<SweepResult> out;
  for (double level : levels) {
    const auto test = perturbed_test_set(data, level, kind, cfg.noise_seed);
    out.push_back(make_row("noise_" + to_string(kind), level,
                           evaluate_model(model, test, cfg.train.threshold), trained.train_seconds,
                           cfg.train.seed));
  }
  return out;
}

// --- bag-of-words baseline ----------------------------------------------------

BowClassifier::BowClassifier(std::size_t vocab_size, std::size_t n_labels)
    : weights_(Tensor::zeros({vocab_size, n_labels})), bias_(Tensor::zeros({n_labels})) {
  if (vocab_size == 0 || n_labels == 0) throw UsageError("bag-of-words model needs V > 0 and m > 0");
}

std::vector<double> BowClassifier::logits(const EncodedExample& example,
                                          std::vector<std::int32_t>& present) const {
  const std::size_t vocab = weights_.rows();
  present.clear();
  for (std::size_t i = 0; i < example.ids.size(); ++i) {
    if (!example.mask[i]) continue;
    const std::int32_t id = example.ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= vocab)
      throw DataError("token id " + std::to_string(id) + " outside vocabulary of " +
                      std::to_string(vocab));
    present.push_back(id);
  }
  std::sort(present.begin(), present.end());
  present.erase(std::unique(present.begin(), present.end()), present.end());
  const std::size_t m = bias_.size();
  std::vector<double> z(bias_.data().begin(), bias_.data().end());
  for (std::int32_t id : present) {
    const auto row = weights_.row(static_cast<std::size_t>(id));
    for (std::size_t j = 0; j < m; ++j) z[j] += row[j];
  }
  return z;
}

double BowClassifier::loss_and_gradient(const EncodedExample& example, double eps_clamp,
                                        std::vector<Tensor>& grads) const {
  std::vector<std::int32_t> present;
  const auto z = logits(example, present);
  const std::size_t m = z.size();
  if (example.labels.size() != m) throw ShapeError("bag-of-words: label vector has the wrong length");
  std::vector<double> p(m);
  for (std::size_t j = 0; j < m; ++j) p[j] = sigmoid(z[j]);
  const double loss = bce_loss(p, example.labels, eps_clamp);

  grads.resize(2);
  grads[0] = Tensor::zeros(weights_.shape());
  grads[1] = Tensor::zeros(bias_.shape());
  for (std::size_t j = 0; j < m; ++j) {
    // Clamped probabilities contribute no gradient, as in the transformer.
    if (p[j] < eps_clamp || p[j] > 1.0 - eps_clamp) continue;
    const double dz = (p[j] - example.labels[j]) / static_cast<double>(m);
    grads[1].data()[j] = dz;
    for (std::int32_t id : present) grads[0](static_cast<std::size_t>(id), j) = dz;
  }
  return loss;
}

std::vector<double> BowClassifier::predict(const EncodedExample& example) const {
  std::vector<std::int32_t> present;
  auto z = logits(example, present);
  for (double& v : z) v = sigmoid(v);
  return z;
}

MetricsReport bow_baseline(const ExperimentData& data, const ExperimentConfig& cfg) {
  BowClassifier model(data.corpus.vocab.size(), data.corpus.label_space.size());
  const auto train_set = data.examples(data.train_order);
  const auto val_set = data.examples(data.validation);
  fit(model, train_set, val_set, cfg.train);
  return evaluate_model(model, data.examples(data.test), cfg.train.threshold);
}

std::vector<NamedReport> compare_methods(const ExperimentData& data, const ExperimentConfig& cfg) {
  const auto trained = train_transformer(data, cfg, data.train_order);
  const auto test = data.examples(data.test);
  return {{"Ours", evaluate_model(trained.model(), test, cfg.train.threshold)},
          {"BoW", bow_baseline(data, cfg)}};
}

// --- output -----------------------------------------------------------------------

std::string results_csv(std::span<const SweepResult> results) {
  std::ostringstream out;
  out << kCsvHeader << "\n";
  for (const auto& r : results)
    out << r.sweep << "," << format_number(r.value) << "," << format_number(r.accuracy) << ","
        << format_number(r.precision) << "," << format_number(r.recall) << ","
        << format_number(r.train_seconds) << "," << r.seed << "\n";
  return out.str();
}

std::vector<SweepResult> parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw DataError("results CSV: missing header '" + std::string(kCsvHeader) + "'");
  auto number = [](const std::string& field, std::size_t line_no) {
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (field.empty() || *end != '\0')
      throw DataError("results CSV line " + std::to_string(line_no) + ": bad number '" + field + "'");
    return v;
  };
  std::vector<SweepResult> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 7)
      throw DataError("results CSV line " + std::to_string(line_no) + ": expected 7 fields");
    SweepResult r;
    r.sweep = f[0];
    r.value = number(f[1], line_no);
    r.accuracy = number(f[2], line_no);
    r.precision = number(f[3], line_no);
    r.recall = number(f[4], line_no);
    r.train_seconds = number(f[5], line_no);
    char* end = nullptr;
    r.seed = std::strtoull(f[6].c_str(), &end, 10);
    if (f[6].empty() || *end != '\0')
      throw DataError("results CSV line " + std::to_string(line_no) + ": bad seed '" + f[6] + "'");
    out.push_back(std::move(r));
  }
  return out;
}

std::string results_svg(std::span<const SweepResult> results) {
  constexpr double W = 640, H = 400, L = 70, R = 130, T = 30, B = 60;
  double lo = results.front().value, hi = lo;
  for (const auto& r : results) {
    lo = std::min(lo, r.value);
    hi = std::max(hi, r.value);
  }
  const bool log_x = lo > 0.0 && hi / lo >= 100.0;
  auto fx = [&](double v) {
    const double a = log_x ? std::log10(lo) : lo, b = log_x ? std::log10(hi) : hi;
    const double t = b > a ? ((log_x ? std::log10(v) : v) - a) / (b - a) : 0.5;
    return L + t * (W - L - R);
  };
  auto fy = [&](double v) { return T + (1.0 - v) * (H - T - B); };

  std::ostringstream s;
  char buf[256];
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", L, H - B, W - R, H - B);
  s << buf;
  std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", L, T, L, H - B);
  s << buf;
  for (int i = 0; i <= 4; ++i) {
    const double v = i / 4.0;
    std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" text-anchor=\"end\">%.2f</text>\n", L - 6, fy(v) + 4, v);
    s << buf;
  }
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%s</text>\n", fx(r.value),
                  H - B + 18, format_number(r.value).c_str());
    s << buf;
  }
  const std::string xlabel = results.front().sweep + (log_x ? " (log scale)" : "");
  std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%s</text>\n", (L + W - R) / 2, H - 15,
                xlabel.c_str());
  s << buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"18\" y=\"%g\" text-anchor=\"middle\" transform=\"rotate(-90 18 %g)\">metric</text>\n",
                (T + H - B) / 2, (T + H - B) / 2);
  s << buf;

  struct Series {
    const char* name;
    const char* color;
    double SweepResult::*field;
  };
  const Series series[] = {{"accuracy", "#1f77b4", &SweepResult::accuracy},
                           {"precision", "#d62728", &SweepResult::precision},
                           {"recall", "#2ca02c", &SweepResult::recall}};
  int legend = 0;
  for (const auto& se : series) {
    s << "<polyline fill=\"none\" stroke=\"" << se.color << "\" stroke-width=\"2\" points=\"";
    for (const auto& r : results) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", fx(r.value), fy(r.*se.field));
      s << buf;
    }
    s << "\"/>\n";
    const double ly = T + 10 + 18 * legend++;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"%s\" stroke-width=\"2\"/>"
                  "<text x=\"%g\" y=\"%g\">%s</text>\n",
                  W - R + 10, ly, W - R + 30, ly, se.color, W - R + 36, ly + 4, se.name);
    s << buf;
  }
  s << "</svg>\n";
  return s.str();
}

void emit_results(std::span<const SweepResult> results, const std::filesystem::path& path) {
  if (results.empty()) throw UsageError("emit_results: no results");
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + p.string());
    out << text;
    if (!out) throw DataError("write failed: " + p.string());
  };
  write(path, results_csv(results));
  auto svg = path;
  svg.replace_extension(".svg");
  write(svg, results_svg(results));
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("spearman: inputs differ in length");
  const std::size_t n = x.size();
  auto ranks = [n](std::span<const double> v) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace medattn
