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

// Acceptance run. Prints one PASS/FAIL line per criterion and exits non-zero
// if any fails. Sweep outputs go to ./acceptance_results.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "medattn/checkpoint.hpp"
#include "medattn/config.hpp"
#include "medattn/errors.hpp"
#include "medattn/experiments.hpp"
#include "medattn/grad_check.hpp"
#include "medattn/metrics.hpp"
#include "medattn/model.hpp"
#include "medattn/training.hpp"

using namespace medattn;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string join(const std::vector<double>& v, const char* f = "%.4f") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? " " : "") + fmt(f, v[i]);
  return out;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string without_timing(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() == 7) f.erase(f.begin() + 5);
    for (std::size_t i = 0; i < f.size(); ++i) out += (i ? "," : "") + f[i];
    out += "\n";
  }
  return out;
}

std::vector<double> column(const std::vector<SweepResult>& rows, double SweepResult::*field) {
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r.*field);
  return out;
}

double f1_of(const MetricsReport& m) {
  return m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
}

// --- criteria --------------------------------------------------------------------

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t coords = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const ModelConfig c = tiny_model_config(seed);
    const auto r = model_grad_check(c, init_params(c), random_example(c, 5 + seed, seed), 1e-7);
    worst = std::max(worst, r.max_rel_error);
    coords += r.coordinates_checked;
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0,
          "max rel error " + fmt("%.3g", worst) + " over " + std::to_string(coords) +
              " coordinates in " + fmt("%.1f", secs) + " s"};
}

Outcome normalization() {
  std::mt19937_64 rng(2026);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::size_t rows = 0;
  double worst = 0.0;
  while (rows < 1000) {
    const std::size_t n = 1 + rng() % 12, d = 2 + rng() % 7;
    Tensor q = Tensor::filled({n, d}, 0.0), k = Tensor::filled({n, d}, 0.0);
    for (double& v : q.data()) v = u(rng);
    for (double& v : k.data()) v = u(rng);
    std::vector<std::uint8_t> mask(n, 1);
    for (std::size_t i = 1; i < n; ++i) mask[i] = rng() % 4 != 0;
    const Tensor w = attention_weights(q, k, mask);
    for (std::size_t i = 0; i < n && rows < 1000; ++i, ++rows) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += w(i, j);
      worst = std::max(worst, std::abs(s - 1.0));
    }
  }

  // head outputs, including saturating logits
  bool inside = true;
  std::size_t outputs = 0;
  for (double scale : {1.0, 50.0, 1000.0}) {
    Tensor w = Tensor::filled({8, 4}, 0.0), b = Tensor::filled({4}, 0.0);
    for (double& v : w.data()) v = u(rng);
    for (double& v : b.data()) v = u(rng);
    for (int row = 0; row < 16; ++row) {
      Tensor h = Tensor::filled({8}, 0.0);
      for (double& v : h.data()) v = u(rng) * scale;
      for (double p : predict(h, w, b).data()) inside = inside && p > 0.0 && p < 1.0, ++outputs;
    }
  }
  const ModelConfig c = tiny_model_config(4);
  std::vector<EncodedExample> batch;
  for (std::uint64_t s = 0; s < 32; ++s) batch.push_back(random_example(c, 1 + s % c.max_len, s));
  for (double p : forward_batch(batch, init_params(c), c).data()) inside = inside && p > 0.0 && p < 1.0, ++outputs;

  return {worst <= 1e-12 && inside,
          "worst |row sum - 1| " + fmt("%.3g", worst) + " over 1000 rows; " + std::to_string(outputs) +
              " outputs " + (inside ? "all" : "not all") + " in (0,1)"};
}

Outcome loss_oracle() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double eps = 1e-7;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + rng() % 12;
    std::vector<double> p(m);
    std::vector<std::uint8_t> y(m);
    for (std::size_t j = 0; j < m; ++j) {
      p[j] = trial % 10 == 0 ? u(rng) * 1e-9 : u(rng);
      y[j] = rng() & 1u;
    }
    long double ref = 0.0L;
    for (std::size_t j = 0; j < m; ++j) {
      long double q = p[j];
      q = std::min<long double>(std::max<long double>(q, eps), 1.0L - eps);
      ref -= y[j] ? std::log(q) : std::log1p(-q);
    }
    ref /= static_cast<long double>(m);
    worst = std::max(worst, static_cast<double>(std::fabs(static_cast<long double>(bce_loss(p, y, eps)) - ref)));
  }

  double worst_grad = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + rng() % 12;
    std::vector<double> z(m);
    std::vector<std::uint8_t> y(m);
    for (std::size_t j = 0; j < m; ++j) z[j] = 8.0 * u(rng) - 4.0, y[j] = rng() & 1u;
    Tape tape;
    Var zv = tape.variable(Tensor({m}, z));
    Var pv = ad::sigmoid(zv);
    const auto g = tape.backward(bce_loss(pv, y, eps));
    for (std::size_t j = 0; j < m; ++j)
      worst_grad = std::max(worst_grad, std::abs(g.at(zv.id())[j] - (pv.value()[j] - y[j]) / static_cast<double>(m)));
  }
  return {worst <= 1e-12 && worst_grad <= 1e-10,
          "loss max |diff| " + fmt("%.3g", worst) + "; logit gradient max |diff| " + fmt("%.3g", worst_grad)};
}

Outcome masking() {
  std::mt19937_64 rng(31);
  std::size_t changed = 0, perturbed = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    ModelConfig c = tiny_model_config(s + 1);
    c.max_len = 16;
    const ModelParams params = init_params(c);
    const EncodedExample ex = random_example(c, 1 + s % 15, 500 + s);
    const auto base = predict_example(params, c, ex);
    const Tensor h = encode_sequence(params, c, ex);
    for (std::size_t i = 0; i < ex.ids.size(); ++i) {
      if (ex.mask[i]) continue;
      EncodedExample other = ex;
      other.ids[i] = static_cast<std::int32_t>(rng() % c.vocab_size);
      ++perturbed;
      changed += predict_example(params, c, other) != base;
      const Tensor h2 = encode_sequence(params, c, other);
      changed += std::memcmp(h2.data().data(), h.data().data(), h.size() * sizeof(double)) != 0;
    }
  }
  return {changed == 0 && perturbed > 0,
          std::to_string(perturbed) + " PAD perturbations, " + std::to_string(changed) + " changed outputs"};
}

Outcome memorization() {
  const ModelConfig c = tiny_model_config(11);
  std::vector<EncodedExample> data;
  for (std::uint64_t i = 0; i < 8; ++i) data.push_back(random_example(c, 3 + i, 4000 + i));
  TrainConfig t;
  t.learning_rate = 1e-2;
  t.batch_size = 8;
  t.max_epochs = 300;
  t.patience = 0;
  TransformerClassifier model(c);
  const auto r = fit(model, data, data, t);
  double reached = 0;
  for (const auto& e : r.history)
    if (e.train_loss < 0.05) {
      reached = static_cast<double>(e.epoch);
      break;
    }
  const double final_loss = mean_loss(model, data, t.eps_clamp);
  return {reached > 0 && final_loss < 0.05,
          "loss < 0.05 first at epoch " + fmt("%.0f", reached) + "; final loss " + fmt("%.4f", final_loss)};
}

struct Reference {
  AppConfig app;
  ExperimentConfig cfg;
  ExperimentData data;
  fs::path out;
};

Outcome lr_direction(const Reference& ref) {
  const auto t0 = Clock::now();
  const auto rows = lr_sweep(ref.app.sweep_rates, ref.data, ref.cfg);
  const double secs = seconds_since(t0);
  emit_results(rows, ref.out / "lr.csv");
  double a5 = -1, a4 = -1, a3 = -1;
  for (const auto& r : rows) (r.value == 1e-5 ? a5 : r.value == 1e-4 ? a4 : a3) = r.accuracy;
  return {a4 >= a5 && a4 >= a3 && secs < 900.0,
          "accuracy 1e-5 " + fmt("%.4f", a5) + ", 1e-4 " + fmt("%.4f", a4) + ", 1e-3 " + fmt("%.4f", a3) +
              "; sweep " + fmt("%.0f", secs) + " s"};
}

Outcome fraction_direction(const Reference& ref) {
  const auto rows = sample_fraction_sweep(ref.app.sweep_fractions, ref.data, ref.cfg);
  emit_results(rows, ref.out / "samples.csv");
  const auto f = column(rows, &SweepResult::value);
  const auto acc = column(rows, &SweepResult::accuracy);
  const auto secs = column(rows, &SweepResult::train_seconds);
  const double rho_acc = spearman(f, acc), rho_t = spearman(f, secs);
  return {rho_acc > 0.8 && rho_t > 0.9,
          "rho(fraction, accuracy) " + fmt("%.3f", rho_acc) + ", rho(fraction, seconds) " + fmt("%.3f", rho_t) +
              "; accuracy " + join(acc)};
}

Outcome noise_direction(const Reference& ref) {
  const auto rows = noise_sweep(ref.app.sweep_levels, NoiseKind::substitute, ref.data, ref.cfg);
  emit_results(rows, ref.out / "noise.csv");
  const auto acc = column(rows, &SweepResult::accuracy);
  bool monotone = true;
  for (std::size_t i = 1; i < rows.size(); ++i) monotone = monotone && acc[i] <= acc[i - 1] + 0.01;
  double a0 = -1, a20 = -1;
  for (const auto& r : rows) {
    if (r.value == 0.0) a0 = r.accuracy;
    if (r.value == 0.2) a20 = r.accuracy;
  }
  return {monotone && a0 >= 0 && a20 >= 0 && a20 <= a0 - 0.02,
          "accuracy by level " + join(acc) + "; drop at 0.20 " + fmt("%.2f", 100 * (a0 - a20)) + " points"};
}

Outcome comparison(const Reference& ref) {
  const auto reports = compare_methods(ref.data, ref.cfg);
  const MetricsReport& ours = reports[0].report;
  const MetricsReport& bow = reports[1].report;
  std::ofstream(ref.out / "compare.txt") << format_report(reports);

  MetricsReport target;
  target.accuracy = 0.778;
  target.precision = 0.759;
  target.recall = 0.732;
  const NamedReport row[] = {{"Ours", target}};
  const bool rendered = format_report(row).find("\nOurs  77.8  75.9  73.2\n") != std::string::npos;

  const double gap = f1_of(ours) - f1_of(bow);
  return {gap >= 0.05 && ours.precision > bow.precision && ours.recall > bow.recall && rendered,
          "F1 ours " + fmt("%.4f", f1_of(ours)) + " (P " + fmt("%.4f", ours.precision) + " R " +
              fmt("%.4f", ours.recall) + ") vs bow " + fmt("%.4f", f1_of(bow)) + " (P " +
              fmt("%.4f", bow.precision) + " R " + fmt("%.4f", bow.recall) + "); row " +
              (rendered ? "rendered" : "NOT rendered")};
}

Outcome determinism(const Reference& ref) {
  auto run = [&](const fs::path& dir, const char* threads) {
    setenv("MEDATTN_THREADS", threads, 1);
    fs::create_directories(dir);
    const auto corpus = preprocess_corpus(generate_corpus(ref.app.synth_config()), ref.app.preprocess_settings());
    write_corpus(dir / "data", corpus);
    const auto data = prepare_experiment(read_corpus(dir / "data"), ref.cfg.test_fraction, ref.cfg.split_seed);
    ExperimentConfig short_cfg = ref.cfg;
    short_cfg.train.max_epochs = 2;
    const auto trained = train_transformer(data, short_cfg, data.train_order);
    save_checkpoint(trained.result.best, dir / "best");
    save_checkpoint(trained.result.last, dir / "last");
    emit_results(noise_sweep(ref.app.sweep_levels, NoiseKind::substitute, data, short_cfg), dir / "noise.csv");
    unsetenv("MEDATTN_THREADS");
  };
  const fs::path a = ref.out / "determinism_a", b = ref.out / "determinism_b";
  run(a, "1");
  run(b, "2");
  std::size_t compared = 0, differing = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file() || e.path().extension() == ".svg") continue;
    const fs::path other = b / fs::relative(e.path(), a);
    std::string x = slurp(e.path()), y = slurp(other);
    if (e.path().extension() == ".csv") x = without_timing(x), y = without_timing(y);
    ++compared;
    differing += !fs::exists(other) || x != y;
  }
  return {compared >= 6 && differing == 0,
          std::to_string(compared) + " files compared (encoded data, checkpoints, CSV without timing), " +
              std::to_string(differing) + " differ"};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int n, const char* name, const std::function<Outcome()>& f) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %2d %s: %s [%.0f s]\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  };

  report(1, "gradient fidelity", gradient_fidelity);
  report(2, "normalization invariants", normalization);
  report(3, "loss oracle", loss_oracle);
  report(4, "masking soundness", masking);
  report(5, "memorization", memorization);

  Reference ref;
  ref.cfg = ref.app.experiment_config();
  ref.out = fs::current_path() / "acceptance_results";
  fs::create_directories(ref.out);
  bool have_data = false;
  try {
    auto corpus = preprocess_corpus(generate_corpus(ref.app.synth_config()), ref.app.preprocess_settings());
    ref.data = prepare_experiment(std::move(corpus), ref.cfg.test_fraction, ref.cfg.split_seed);
    have_data = true;
  } catch (const std::exception& e) {
    std::printf("reference corpus could not be built: %s\n", e.what());
  }
  auto on_reference = [&](int n, const char* name, Outcome (*f)(const Reference&)) {
    report(n, name, [&] { return have_data ? f(ref) : Outcome{false, "no reference corpus"}; });
  };
  on_reference(6, "learning-rate direction", lr_direction);
  on_reference(7, "training-size direction", fraction_direction);
  on_reference(8, "noise direction", noise_direction);
  on_reference(9, "baseline comparison", comparison);
  on_reference(10, "determinism", determinism);

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
