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

// Runs the built command-line tool as a subprocess.

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "test_support.hpp"

using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(const medattn_test::TempDir& dir, const std::string& args) {
  const std::string out = (dir / "stdout.txt").string(), err = (dir / "stderr.txt").string();
  const std::string cmd = std::string("'") + MEDATTN_CLI_PATH + "' " + args + " >'" + out + "' 2>'" + err + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = medattn_test::slurp(out);
  r.err = medattn_test::slurp(err);
  return r;
}

const char* kTiny =
    " --set synth.n_labels=3 --set model.d_model=8 --set model.n_heads=2 --set model.n_layers=1"
    " --set model.d_ff=16 --set model.max_len=32";

}  // namespace

TEST_CASE("usage errors exit 1") {
  medattn_test::TempDir dir("cli-usage");
  CHECK(run(dir, "").code == 1);
  CHECK(run(dir, "frobnicate").code == 1);
  CHECK(run(dir, "synth --out x.jsonl --bogus").code == 1);
  const Run no_data = run(dir, "train --out " + (dir / "m").string());
  CHECK(no_data.code == 1);
  CHECK(no_data.err.find("--data") != std::string::npos);
  CHECK(run(dir, "synth --out " + (dir / "a.jsonl").string() + " --set train.learning_rat=1").code == 1);
  CHECK(run(dir, "report").code == 1);
}

TEST_CASE("help documents every configuration default") {
  medattn_test::TempDir dir("cli-help");
  const Run help = run(dir, "--help");
  CHECK(help.code == 0);
  for (const char* key : {"train.learning_rate = 0.0001", "train.batch_size = 1", "synth.n_docs = 2000",
                          "sweep.levels = 0, 0.05, 0.1, 0.15, 0.2", "MEDATTN_THREADS"})
    CHECK(help.out.find(key) != std::string::npos);
}

TEST_CASE("synth is byte-identical across runs and echoes its configuration") {
  medattn_test::TempDir dir("cli-synth");
  const std::string a = (dir / "a.jsonl").string(), b = (dir / "b.jsonl").string();
  const Run first = run(dir, "synth --docs 100 --seed 7 --out " + a);
  REQUIRE(first.code == 0);
  REQUIRE(run(dir, "synth --docs 100 --seed 7 --out " + b).code == 0);
  const std::string text = medattn_test::slurp(a);
  CHECK(!text.empty());
  CHECK(text == medattn_test::slurp(b));
  CHECK(first.err.find("# resolved configuration") != std::string::npos);
  CHECK(first.err.find("synth.seed = 7") != std::string::npos);
  CHECK(first.err.find("synth.n_docs = 100") != std::string::npos);
  std::size_t lines = 0;
  for (char ch : text) lines += ch == '\n';
  CHECK(lines == 100);
}

TEST_CASE("pipeline through predict and eval") {
  medattn_test::TempDir dir("cli-pipeline");
  const std::string jsonl = (dir / "notes.jsonl").string(), data = (dir / "data").string(),
                    model = (dir / "model").string();
  REQUIRE(run(dir, std::string("synth --docs 80 --out ") + jsonl + kTiny).code == 0);
  const Run prep = run(dir, std::string("preprocess --in ") + jsonl + " --out " + data + kTiny);
  REQUIRE(prep.code == 0);
  CHECK(json::parse(prep.out).is_object());
  REQUIRE(run(dir, std::string("train --data ") + data + " --out " + model + " --epochs 2 --batch-size 4" + kTiny)
              .code == 0);

  const Run pred = run(dir, "predict --model " + model + " --text 'Patient reports cough and fever.'");
  REQUIRE(pred.code == 0);
  const json probs = json::parse(pred.out);
  CHECK(probs.size() == 3);
  for (const auto& [code, p] : probs.items()) {
    CHECK(!code.empty());
    CHECK(p.get<double>() > 0.0);
    CHECK(p.get<double>() < 1.0);
  }
  medattn_test::spit(dir / "note.txt", "Patient reports cough and fever.");
  CHECK(json::parse(run(dir, "predict --model " + model + " --file " + (dir / "note.txt").string()).out) == probs);
  CHECK(run(dir, "predict --model " + model).code == 1);

  const Run ev = run(dir, "eval --model " + model + " --data " + data + " --probs " + (dir / "p.jsonl").string());
  REQUIRE(ev.code == 0);
  CHECK(json::parse(ev.out).contains("accuracy"));

  SUBCASE("data errors exit 2") {
    medattn_test::spit(dir / "broken.jsonl", "{not json\n");
    CHECK(run(dir, "preprocess --in " + (dir / "broken.jsonl").string() + " --out " + (dir / "d2").string()).code ==
          2);
    medattn_test::spit(dir / "model" / "params.bin", "short");
    CHECK(run(dir, "predict --model " + model + " --text hello").code == 2);
  }
}

TEST_CASE("gradcheck and report") {
  medattn_test::TempDir dir("cli-misc");
  const Run ok = run(dir, "gradcheck");
  CHECK(ok.code == 0);
  CHECK(!ok.out.empty());
  CHECK(run(dir, "gradcheck --tolerance 0").code == 3);

  const Run table = run(dir, "report --row Ours,0.778,0.759,0.732");
  CHECK(table.code == 0);
  CHECK(table.out.find("\nOurs  77.8  75.9  73.2\n") != std::string::npos);
  CHECK(run(dir, "report --row Ours,x,0.7,0.7").code == 1);
  CHECK(run(dir, "report --row Ours,1.5,0.7,0.7").code == 1);
  medattn_test::spit(dir / "m.csv", "wrong,header\n");
  CHECK(run(dir, "report --csv " + (dir / "m.csv").string()).code == 2);
}
