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

#include "medattn/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "medattn/errors.hpp"

namespace medattn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw UsageError("config key '" + key + "' expects " + expected + ", got '" + value + "'");
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    bad_value(key, v, "a non-negative integer");
  errno = 0;
  const unsigned long long out = std::strtoull(v.c_str(), nullptr, 10);
  if (errno == ERANGE) bad_value(key, v, "a non-negative integer");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(out))
    bad_value(key, v, "a finite number");
  return out;
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  if (out.empty()) bad_value(key, v, "a comma-separated list of numbers");
  return out;
}

std::string list_string(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_number(v[i]);
  return out;
}

std::string number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Shortest text that reads back to the same value.
  for (int p = 1; p <= 17; ++p) {
    char shorter[64];
    std::snprintf(shorter, sizeof shorter, "%.*g", p, v);
    if (std::strtod(shorter, nullptr) == v) return shorter;
  }
  return buf;
}

struct Field {
  const char* key;
  const char* help;
  std::function<void(AppConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const AppConfig&)> get;
};

#define MEDATTN_SIZE(key, help, expr)                                                           \
  Field {                                                                                       \
    key, help, [](AppConfig& c, const std::string& k, const std::string& v) { c.expr = to_u64(k, v); }, \
        [](const AppConfig& c) { return std::to_string(c.expr); }                               \
  }
#define MEDATTN_REAL(key, help, expr)                                                              \
  Field {                                                                                          \
    key, help, [](AppConfig& c, const std::string& k, const std::string& v) { c.expr = to_double(k, v); }, \
        [](const AppConfig& c) { return number(c.expr); }                                          \
  }
#define MEDATTN_LIST(key, help, expr)                                                             \
  Field {                                                                                         \
    key, help, [](AppConfig& c, const std::string& k, const std::string& v) { c.expr = to_list(k, v); }, \
        [](const AppConfig& c) { return list_string(c.expr); }                                    \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      MEDATTN_SIZE("model.d_model", "embedding width", model.d_model),
      MEDATTN_SIZE("model.n_heads", "attention heads", model.n_heads),
      MEDATTN_SIZE("model.n_layers", "encoder layers", model.n_layers),
      MEDATTN_SIZE("model.d_ff", "feed-forward width", model.d_ff),
      MEDATTN_SIZE("model.max_len", "tokens kept per note (encoding and model)", model.max_len),
      MEDATTN_SIZE("model.seed", "parameter initialization seed", model.seed),
      MEDATTN_REAL("train.learning_rate", "optimizer step size", train.learning_rate),
      MEDATTN_SIZE("train.batch_size", "examples per optimizer step", train.batch_size),
      MEDATTN_SIZE("train.max_epochs", "epoch limit", train.max_epochs),
      MEDATTN_SIZE("train.patience", "epochs without validation improvement before stopping; 0 disables",
                   train.patience),
      MEDATTN_REAL("train.eps_clamp", "probability clamp inside the loss", train.eps_clamp),
      MEDATTN_SIZE("train.seed", "shuffling and train/validation split seed", train.seed),
      MEDATTN_REAL("train.threshold", "decision threshold on probabilities", train.threshold),
      Field{"train.optimizer", "adam or sgd",
            [](AppConfig& c, const std::string&, const std::string& v) { c.train.optimizer = parse_optimizer(v); },
            [](const AppConfig& c) { return to_string(c.train.optimizer); }},
      MEDATTN_SIZE("synth.n_docs", "synthetic notes to generate", synth_docs),
      MEDATTN_SIZE("synth.n_labels", "synthetic diagnosis codes", synth_labels),
      MEDATTN_SIZE("synth.seed", "synthetic corpus seed", synth_seed),
      MEDATTN_SIZE("synth.filler_vocab", "distinct filler words", synth_filler_vocab),
      MEDATTN_SIZE("synth.min_len", "fewest filler words per note", synth_min_len),
      MEDATTN_SIZE("synth.max_len", "most filler words per note", synth_max_len),
      MEDATTN_SIZE("preprocess.min_tokens", "notes with fewer tokens are dropped", preprocess.min_tokens),
      MEDATTN_SIZE("preprocess.min_freq", "rarer tokens map to <unk>", preprocess.min_freq),
      MEDATTN_SIZE("preprocess.max_vocab", "vocabulary size cap including <pad> and <unk>",
                   preprocess.max_vocab),
      MEDATTN_REAL("split.test_fraction", "held-out test share for experiments", test_fraction),
      MEDATTN_SIZE("split.seed", "train/test split seed for experiments", split_seed),
      MEDATTN_LIST("sweep.rates", "learning rates for `sweep lr`", sweep_rates),
      MEDATTN_LIST("sweep.fractions", "training fractions for `sweep samples`", sweep_fractions),
      MEDATTN_LIST("sweep.levels", "noise levels for `sweep noise`", sweep_levels),
      Field{"sweep.noise_kind", "delete, substitute or typo",
            [](AppConfig& c, const std::string& k, const std::string& v) {
              try {
                c.noise_kind = parse_noise_kind(v);
              } catch (const UsageError&) {
                bad_value(k, v, "delete, substitute or typo");
              }
            },
            [](const AppConfig& c) { return to_string(c.noise_kind); }},
      MEDATTN_SIZE("sweep.noise_seed", "perturbation seed", noise_seed),
  };
  return table;
}

#undef MEDATTN_SIZE
#undef MEDATTN_REAL
#undef MEDATTN_LIST

const Field& find_field(const std::string& key) {
  for (const auto& f : fields())
    if (key == f.key) return f;
  std::string nearest;
  std::size_t best = std::string::npos;
  for (const auto& f : fields()) {
    const std::size_t d = edit_distance(key, f.key);
    if (d < best) {
      best = d;
      nearest = f.key;
    }
  }
  throw UsageError("unknown config key '" + key + "' (nearest valid key: '" + nearest + "')");
}

}  // namespace

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

SynthConfig AppConfig::synth_config() const {
  SynthConfig s = default_synth_config(synth_docs, synth_labels, synth_seed);
  s.filler_vocab = synth_filler_vocab;
  s.min_len = synth_min_len;
  s.max_len = synth_max_len;
  s.validate();
  return s;
}

PreprocessSettings AppConfig::preprocess_settings() const {
  PreprocessSettings p = preprocess;
  p.max_len = model.max_len;
  return p;
}

ExperimentConfig AppConfig::experiment_config() const {
  ExperimentConfig e;
  e.model = model;
  e.train = train;
  e.test_fraction = test_fraction;
  e.split_seed = split_seed;
  e.noise_seed = noise_seed;
  return e;
}

AppConfig parse_config(const std::string& text, const ConfigOverrides& overrides) {
  AppConfig config;
  std::map<std::string, std::size_t> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (const auto hash = line.find(" #"); hash != std::string::npos) line = trim(line.substr(0, hash));
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(line_no) + ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Field& f = find_field(key);
    if (auto [it, fresh] = seen.emplace(key, line_no); !fresh)
      throw UsageError("config key '" + key + "' appears on lines " + std::to_string(it->second) +
                       " and " + std::to_string(line_no));
    f.set(config, key, value);
  }
  for (const auto& [key, value] : overrides) find_field(key).set(config, key, trim(value));

  ModelConfig shape = config.model;  // sizes that come from data get placeholders
  shape.vocab_size = 2;
  shape.n_labels = 1;
  shape.validate();
  config.train.validate();
  if (!(config.test_fraction > 0.0 && config.test_fraction < 1.0))
    throw UsageError("config key 'split.test_fraction' must lie in (0, 1)");
  return config;
}

AppConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  if (path.empty()) return parse_config("", overrides);
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), overrides);
}

std::string render_config(const AppConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(config) + "\n";
  return out;
}

std::string config_value(const AppConfig& config, const std::string& key) {
  return find_field(key).get(config);
}

std::string config_reference() {
  const AppConfig defaults;
  constexpr std::size_t kWidth = 36;
  std::string out;
  for (const auto& f : fields()) {
    std::string entry = "  " + std::string(f.key) + " = " + f.get(defaults);
    if (entry.size() + 2 > kWidth) entry += "\n" + std::string(kWidth, ' ');
    else entry.resize(kWidth, ' ');
    out += entry + f.help + "\n";
  }
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.key);
  return out;
}

}  // namespace medattn
