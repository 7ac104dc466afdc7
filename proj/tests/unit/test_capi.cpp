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

#include <cmath>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "medattn/medattn.h"
#include "test_support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ConfigHandle {
  ma_config* ptr = nullptr;
  ~ConfigHandle() { ma_config_free(ptr); }
};

struct ModelHandle {
  ma_model* ptr = nullptr;
  ~ModelHandle() { ma_model_free(ptr); }
};

// Takes ownership of a library string.
std::string take(char* s) {
  std::string out = s ? s : "";
  ma_string_free(s);
  return out;
}

ma_status load(ConfigHandle& c, std::vector<std::string> overrides, const char* path = nullptr) {
  std::vector<const char*> ptrs;
  for (const auto& o : overrides) ptrs.push_back(o.c_str());
  return ma_config_load(path, ptrs.data(), ptrs.size(), &c.ptr);
}

const std::vector<std::string> kTiny = {
    "synth.n_docs=80",   "synth.n_labels=3",   "model.d_model=8",       "model.n_heads=2",
    "model.n_layers=1",  "model.d_ff=16",      "model.max_len=32",      "train.max_epochs=2",
    "train.batch_size=4", "train.learning_rate=3e-3", "sweep.rates=1e-3", "sweep.levels=0, 0.2"};

}  // namespace

TEST_CASE("version and error reporting") {
  CHECK(std::string(ma_version()).size() > 0);
  ConfigHandle c;
  CHECK(load(c, {"train.learning_rat=1"}) == MA_ERR_USAGE);
  CHECK(c.ptr == nullptr);
  const std::string msg = ma_last_error();
  CHECK(msg.find("train.learning_rate") != std::string::npos);
  CHECK(load(c, {"no equals sign"}) == MA_ERR_USAGE);
  CHECK(load(c, {}, "/nonexistent/run.conf") == MA_ERR_USAGE);

  CHECK(load(c, {}) == MA_OK);
  CHECK(std::string(ma_last_error()).empty());
  char* out = nullptr;
  REQUIRE(ma_config_get(c.ptr, "train.threshold", &out) == MA_OK);
  CHECK(take(out) == "0.5");
  CHECK(ma_config_get(c.ptr, "bogus", &out) == MA_ERR_USAGE);
  REQUIRE(ma_config_render(c.ptr, &out) == MA_OK);
  CHECK(take(out).find("train.batch_size = ") != std::string::npos);
  REQUIRE(ma_config_reference(&out) == MA_OK);
  CHECK(take(out).find("model.d_model") != std::string::npos);
}

TEST_CASE("null arguments are usage errors") {
  char* out = nullptr;
  double err = 0;
  CHECK(ma_config_get(nullptr, "train.seed", &out) == MA_ERR_USAGE);
  CHECK(ma_synth(nullptr, "x.jsonl") == MA_ERR_USAGE);
  CHECK(ma_model_load(nullptr, nullptr) == MA_ERR_USAGE);
  CHECK(ma_predict_text(nullptr, "note", &out) == MA_ERR_USAGE);
  CHECK(ma_evaluate(nullptr, "dir", 0.5, nullptr, &out) == MA_ERR_USAGE);
  CHECK(ma_format_report(nullptr, nullptr, nullptr, nullptr, 1, &out) == MA_ERR_USAGE);
  CHECK(std::string(ma_last_error()).size() > 0);
  ma_config_free(nullptr);
  ma_model_free(nullptr);
  ma_string_free(nullptr);
  CHECK(err == 0);
}

TEST_CASE("gradcheck and report") {
  double err = 1.0;
  char* out = nullptr;
  REQUIRE(ma_gradcheck(1, &err, &out) == MA_OK);
  CHECK(err < 1e-4);
  CHECK(take(out).find("max relative error") != std::string::npos);
  CHECK(ma_gradcheck(2, nullptr, nullptr) == MA_OK);

  const char* names[] = {"Ours"};
  const double acc[] = {0.778}, prec[] = {0.759}, rec[] = {0.732};
  REQUIRE(ma_format_report(names, acc, prec, rec, 1, &out) == MA_OK);
  CHECK(take(out).find("\nOurs  77.8  75.9  73.2\n") != std::string::npos);
  const double bad[] = {1.5}, nan[] = {std::nan("")};
  CHECK(ma_format_report(names, bad, prec, rec, 1, &out) == MA_ERR_USAGE);
  CHECK(ma_format_report(names, acc, nan, rec, 1, &out) == MA_ERR_USAGE);
  CHECK(ma_format_report(names, acc, prec, rec, 0, &out) == MA_ERR_USAGE);
}

TEST_CASE("synth, preprocess, train, predict and evaluate") {
  medattn_test::TempDir dir("capi");
  const std::string jsonl = (dir / "notes.jsonl").string();
  const std::string data = (dir / "data").string();
  const std::string model_dir = (dir / "model").string();
  ConfigHandle c;
  REQUIRE(load(c, kTiny) == MA_OK);

  REQUIRE(ma_synth(c.ptr, jsonl.c_str()) == MA_OK);
  char* out = nullptr;
  REQUIRE(ma_preprocess(c.ptr, jsonl.c_str(), data.c_str(), &out) == MA_OK);
  CHECK(json::parse(take(out)).is_object());
  for (const char* f : {"dataset.jsonl", "vocab.txt", "labels.txt", "summary.json"})
    CHECK(fs::exists(fs::path(data) / f));
  CHECK(ma_preprocess(c.ptr, (dir / "missing.jsonl").string().c_str(), data.c_str(), nullptr) == MA_ERR_DATA);

  REQUIRE(ma_train(c.ptr, data.c_str(), model_dir.c_str(), nullptr, &out) == MA_OK);
  CHECK(json::parse(take(out)).is_object());
  for (const char* f : {"manifest.json", "params.bin", "vocab.txt", "labels.txt", "history.csv", "last/manifest.json"})
    CHECK(fs::exists(fs::path(model_dir) / f));
  CHECK(ma_train(c.ptr, (dir / "nodata").string().c_str(), model_dir.c_str(), nullptr, nullptr) == MA_ERR_DATA);

  ModelHandle m;
  REQUIRE(ma_model_load(model_dir.c_str(), &m.ptr) == MA_OK);
  REQUIRE(ma_model_label_count(m.ptr) == 3);
  ma_model* missing = nullptr;
  CHECK(ma_model_load((dir / "nowhere").string().c_str(), &missing) == MA_ERR_DATA);
  CHECK(missing == nullptr);

  // predict on a raw note agrees with evaluate on the encoded dataset
  std::istringstream lines(medattn_test::slurp(jsonl));
  json record;
  for (std::string line; std::getline(lines, line);) {
    record = json::parse(line);
    if (!record.at("labels").empty()) break;  // unlabeled notes are not encoded
  }
  REQUIRE(ma_predict_text(m.ptr, record.at("text").get<std::string>().c_str(), &out) == MA_OK);
  const json predicted = json::parse(take(out));
  CHECK(predicted.size() == 3);
  double probs[3];
  REQUIRE(ma_predict_probs(m.ptr, record.at("text").get<std::string>().c_str(), probs) == MA_OK);

  const std::string probs_path = (dir / "probs.jsonl").string();
  REQUIRE(ma_evaluate(m.ptr, data.c_str(), 0.5, probs_path.c_str(), &out) == MA_OK);
  const json metrics = json::parse(take(out));
  CHECK(metrics.at("accuracy").get<double>() >= 0.0);
  CHECK(metrics.at("accuracy").get<double>() <= 1.0);
  bool found = false;
  std::istringstream rows(medattn_test::slurp(probs_path));
  for (std::string line; std::getline(rows, line);) {
    const json row = json::parse(line);
    if (row.at("id") != record.at("id")) continue;
    found = true;
    CHECK(row.at("probabilities") == predicted);
    std::size_t j = 0;
    for (const auto& [code, p] : row.at("probabilities").items()) {
      (void)code;
      CHECK(p.get<double>() == probs[j++]);
    }
  }
  CHECK(found);
  CHECK(ma_evaluate(m.ptr, data.c_str(), 0.0, nullptr, &out) == MA_ERR_USAGE);

  SUBCASE("sweeps and baseline") {
    const std::string csv = (dir / "noise.csv").string();
    REQUIRE(ma_sweep(c.ptr, "noise", data.c_str(), csv.c_str()) == MA_OK);
    CHECK(medattn_test::slurp(csv).rfind("sweep,value,accuracy,precision,recall,train_seconds,seed\n", 0) == 0);
    CHECK(fs::exists(dir / "noise.svg"));
    CHECK(ma_sweep(c.ptr, "width", data.c_str(), csv.c_str()) == MA_ERR_USAGE);
    REQUIRE(ma_baseline(c.ptr, data.c_str(), nullptr, &out) == MA_OK);
    const std::string table = take(out);
    CHECK(table.find("Ours") != std::string::npos);
    CHECK(table.find("BoW") != std::string::npos);
  }

  SUBCASE("resume continues from the last checkpoint") {
    ConfigHandle more;
    std::vector<std::string> o = kTiny;
    o.push_back("train.max_epochs=3");
    REQUIRE(load(more, o) == MA_OK);
    const std::string resumed = (dir / "resumed").string();
    REQUIRE(ma_train(more.ptr, data.c_str(), resumed.c_str(), (fs::path(model_dir) / "last").string().c_str(),
                     &out) == MA_OK);
    take(out);
    const std::string history = medattn_test::slurp(fs::path(resumed) / "history.csv");
    CHECK(history.find("\n3,") != std::string::npos);
  }
}
