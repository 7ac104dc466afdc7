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

#include <filesystem>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "medattn/checkpoint.hpp"
#include "medattn/errors.hpp"
#include "test_support.hpp"

using namespace medattn;
using medattn_test::slurp;
using medattn_test::spit;
namespace fs = std::filesystem;

namespace {

Checkpoint trained_checkpoint() {
  const ModelConfig c = tiny_model_config(4);
  std::vector<EncodedExample> data;
  for (std::uint64_t s = 0; s < 20; ++s) data.push_back(random_example(c, 4 + s % 6, s));
  TrainConfig t;
  t.learning_rate = 3e-3;
  t.batch_size = 4;
  t.max_epochs = 2;
  t.seed = 8;
  return train(data, c, t).last;
}

std::string error_of(const fs::path& dir) {
  try {
    load_checkpoint(dir);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("save then load is bitwise lossless") {
  medattn_test::TempDir dir("ckpt");
  const Checkpoint c = trained_checkpoint();
  CHECK(c.state.optimizer.step > 0);
  save_checkpoint(c, dir.path());
  const Checkpoint back = load_checkpoint(dir.path());
  CHECK(back.bitwise_equal(c));
  CHECK(back.state.rng_state == c.state.rng_state);
  CHECK(!fs::exists(dir / "params.bin.tmp"));
  CHECK(!fs::exists(dir / "manifest.json.tmp"));

  save_checkpoint(back, dir / "again");
  CHECK(slurp(dir / "params.bin") == slurp(dir / "again" / "params.bin"));
  CHECK(slurp(dir / "manifest.json") == slurp(dir / "again" / "manifest.json"));

  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest.at("version") == kCheckpointVersion);
  CHECK(manifest.at("tensors").size() == 3 * c.params.tensors().size());
  CHECK(manifest.at("tensors")[0].at("name") == "embedding");
  CHECK(manifest.at("blob").at("size_bytes") == 3 * 8 * c.params.parameter_count());
}

TEST_CASE("load errors") {
  medattn_test::TempDir dir("ckpt-bad");
  const Checkpoint c = trained_checkpoint();
  save_checkpoint(c, dir.path());
  const std::string blob = slurp(dir / "params.bin");
  const std::string manifest = slurp(dir / "manifest.json");

  SUBCASE("truncated blob names both sizes") {
    spit(dir / "params.bin", blob.substr(0, blob.size() - 8));
    const std::string msg = error_of(dir.path());
    CHECK(msg.find(std::to_string(blob.size())) != std::string::npos);
    CHECK(msg.find(std::to_string(blob.size() - 8)) != std::string::npos);
  }
  SUBCASE("flipped byte fails the checksum") {
    std::string bad = blob;
    bad[bad.size() / 2] ^= 0x5a;
    spit(dir / "params.bin", bad);
    CHECK(error_of(dir.path()).find("checksum") != std::string::npos);
  }
  SUBCASE("bumped version is an incompatibility") {
    auto j = nlohmann::json::parse(manifest);
    j["version"] = kCheckpointVersion + 1;
    spit(dir / "manifest.json", j.dump());
    CHECK(error_of(dir.path()).find("incompatible checkpoint version") != std::string::npos);
  }
  SUBCASE("garbled manifest") {
    spit(dir / "manifest.json", "{ not json");
    CHECK(!error_of(dir.path()).empty());
  }
  SUBCASE("missing directory") {
    CHECK(!error_of(dir / "nope").empty());
  }
}
