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

#include <string>

#include "doctest.h"
#include "medattn/config.hpp"
#include "medattn/errors.hpp"
#include "test_support.hpp"

using namespace medattn;

namespace {

std::string usage_error(const std::string& text, const ConfigOverrides& overrides = {}) {
  try {
    parse_config(text, overrides);
  } catch (const UsageError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("empty input gives the defaults") {
  const AppConfig defaults;
  CHECK(render_config(parse_config("")) == render_config(defaults));
  CHECK(render_config(parse_config("\n  # only a comment\n\n")) == render_config(defaults));
  CHECK(render_config(load_config({})) == render_config(defaults));
  CHECK(config_value(defaults, "train.learning_rate") == "0.0001");
  CHECK(config_value(defaults, "sweep.rates") == "1e-5, 1e-4, 1e-3");
  CHECK(config_value(defaults, "sweep.noise_kind") == "substitute");
  CHECK(config_value(defaults, "synth.n_docs") == "2000");
}

TEST_CASE("file values and overrides") {
  const AppConfig c = parse_config(
      "# experiment\n"
      "train.learning_rate = 3e-4   # comment\n"
      "model.d_model=32\n"
      "  sweep.levels = 0, 0.1 ,0.3\n"
      "sweep.noise_kind = delete\n"
      "train.optimizer = sgd\n",
      {{"model.d_model", "16"}, {"train.seed", " 9 "}});
  CHECK(c.train.learning_rate == 3e-4);
  CHECK(c.model.d_model == 16);
  CHECK(c.train.seed == 9);
  CHECK(c.sweep_levels == std::vector<double>{0.0, 0.1, 0.3});
  CHECK(c.noise_kind == NoiseKind::remove);
  CHECK(c.train.optimizer == OptimizerKind::sgd);

  const ExperimentConfig e = c.experiment_config();
  CHECK(e.model.d_model == 16);
  CHECK(e.train.learning_rate == 3e-4);
  CHECK(c.preprocess_settings().max_len == c.model.max_len);
  CHECK(c.synth_config().n_docs == c.synth_docs);

  medattn_test::TempDir dir("config");
  medattn_test::spit(dir / "run.conf", "train.max_epochs = 7\n");
  CHECK(load_config(dir / "run.conf").train.max_epochs == 7);
  CHECK(load_config(dir / "run.conf", {{"train.max_epochs", "3"}}).train.max_epochs == 3);
  CHECK_THROWS_AS(load_config(dir / "missing.conf"), UsageError);
}

TEST_CASE("render then parse is the identity") {
  AppConfig c;
  c.train.learning_rate = 0.1 + 0.2;
  c.sweep_fractions = {0.25, 1.0};
  c.model.n_layers = 0;
  const std::string text = render_config(c);
  CHECK(render_config(parse_config(text)) == text);
  CHECK(parse_config(text).train.learning_rate == c.train.learning_rate);
  for (const auto& key : config_keys()) {
    CHECK(text.find(key + " = ") != std::string::npos);
    CHECK(config_reference().find(key) != std::string::npos);
  }
}

TEST_CASE("errors") {
  const std::string misspelled = usage_error("train.learning_rat = 1e-4\n");
  CHECK(misspelled.find("train.learning_rat'") != std::string::npos);
  CHECK(misspelled.find("nearest valid key: 'train.learning_rate'") != std::string::npos);
  CHECK(usage_error("", {{"modle.d_model", "8"}}).find("'model.d_model'") != std::string::npos);

  CHECK(usage_error("train.seed = 1\ntrain.seed = 2\n").find("lines 1 and 2") != std::string::npos);
  CHECK(usage_error("just words\n").find("config line 1") != std::string::npos);
  CHECK(usage_error("model.d_model = -4\n").find("non-negative integer") != std::string::npos);
  CHECK(usage_error("model.d_model = 4.5\n").find("non-negative integer") != std::string::npos);
  CHECK(usage_error("train.learning_rate = fast\n").find("finite number") != std::string::npos);
  CHECK(usage_error("train.learning_rate = inf\n").find("finite number") != std::string::npos);
  CHECK(usage_error("sweep.rates = 1e-4,,1e-3\n").find("finite number") != std::string::npos);
  CHECK(usage_error("sweep.noise_kind = blur\n").find("delete, substitute or typo") != std::string::npos);
  CHECK(!usage_error("model.d_model = 30\nmodel.n_heads = 4\n").empty());
  CHECK(!usage_error("train.batch_size = 0\n").empty());
  CHECK(!usage_error("split.test_fraction = 1\n").empty());
  CHECK_THROWS_AS(config_value(AppConfig{}, "nope"), UsageError);
}

TEST_CASE("edit_distance") {
  CHECK(edit_distance("", "") == 0);
  CHECK(edit_distance("abc", "") == 3);
  CHECK(edit_distance("kitten", "sitting") == 3);
  CHECK(edit_distance("flaw", "lawn") == 2);
  CHECK(edit_distance("same", "same") == 0);
  CHECK(edit_distance("ab", "ba") == 2);
}
