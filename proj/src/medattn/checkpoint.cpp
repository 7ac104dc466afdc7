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

#include "medattn/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "medattn/errors.hpp"

namespace medattn {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kFormat = "medattn-checkpoint";
constexpr const char* kManifest = "manifest.json";
constexpr const char* kBlob = "params.bin";

std::uint32_t crc_of(const unsigned char* bytes, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in bounded chunks.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, bytes, chunk);
    bytes += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void append_le(std::vector<unsigned char>& out, const Tensor& t) {
  for (double v : t.data()) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      out.push_back(static_cast<unsigned char>(bits & 0xffu));
      bits >>= 8;
    }
  }
}

void read_le(const unsigned char* bytes, Tensor& t) {
  for (double& v : t.data()) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | bytes[b];
    v = std::bit_cast<double>(bits);
    bytes += 8;
  }
}

std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hex_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw DataError("checkpoint: malformed number '" + s + "'");
  return v;
}

json model_to_json(const ModelConfig& m) {
  return {{"vocab_size", m.vocab_size}, {"d_model", m.d_model}, {"n_heads", m.n_heads},
          {"n_layers", m.n_layers},     {"d_ff", m.d_ff},       {"max_len", m.max_len},
          {"n_labels", m.n_labels},     {"seed", m.seed}};
}

ModelConfig model_from_json(const json& j) {
  ModelConfig m;
  m.vocab_size = j.at("vocab_size").get<std::size_t>();
  m.d_model = j.at("d_model").get<std::size_t>();
  m.n_heads = j.at("n_heads").get<std::size_t>();
  m.n_layers = j.at("n_layers").get<std::size_t>();
  m.d_ff = j.at("d_ff").get<std::size_t>();
  m.max_len = j.at("max_len").get<std::size_t>();
  m.n_labels = j.at("n_labels").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  return m;
}

json train_to_json(const TrainConfig& t) {
  return {{"learning_rate", hex_double(t.learning_rate)},
          {"batch_size", t.batch_size},
          {"max_epochs", t.max_epochs},
          {"patience", t.patience},
          {"eps_clamp", hex_double(t.eps_clamp)},
          {"seed", t.seed},
          {"threshold", hex_double(t.threshold)},
          {"optimizer", to_string(t.optimizer)}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig t;
  t.learning_rate = parse_hex_double(j.at("learning_rate").get<std::string>());
  t.batch_size = j.at("batch_size").get<std::size_t>();
  t.max_epochs = j.at("max_epochs").get<std::size_t>();
  t.patience = j.at("patience").get<std::size_t>();
  t.eps_clamp = parse_hex_double(j.at("eps_clamp").get<std::string>());
  t.seed = j.at("seed").get<std::uint64_t>();
  t.threshold = parse_hex_double(j.at("threshold").get<std::string>());
  t.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  return t;
}

struct Stored {
  std::string name;
  Tensor* tensor;
};

std::vector<Stored> stored_tensors(Checkpoint& c) {
  std::vector<Stored> out;
  const auto names = c.params.names();
  const auto params = c.params.tensors();
  for (std::size_t i = 0; i < params.size(); ++i) out.push_back({names[i], params[i]});
  auto& opt = c.state.optimizer;
  for (std::size_t i = 0; i < opt.first_moment.size(); ++i)
    out.push_back({"adam.m." + names.at(i), &opt.first_moment[i]});
  for (std::size_t i = 0; i < opt.second_moment.size(); ++i)
    out.push_back({"adam.v." + names.at(i), &opt.second_moment[i]});
  return out;
}

void write_file_atomic(const fs::path& target, const std::string& bytes) {
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw DataError("cannot move " + tmp.string() + " into place: " + ec.message());
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const fs::path& dir) {
  Checkpoint c = checkpoint;  // stored_tensors needs mutable access
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());

  std::vector<unsigned char> blob;
  json entries = json::array();
  for (const auto& s : stored_tensors(c)) {
    const std::size_t offset = blob.size();
    append_le(blob, *s.tensor);
    entries.push_back({{"name", s.name},
                       {"shape", s.tensor->shape()},
                       {"offset", offset},
                       {"count", s.tensor->size()},
                       {"crc32", crc_of(blob.data() + offset, blob.size() - offset)}});
  }

  json manifest = {
      {"format", kFormat},
      {"version", c.format_version},
      {"model", model_to_json(c.model)},
      {"train", train_to_json(c.train)},
      {"state",
       {{"epoch", c.state.epoch},
        {"optimizer_step", c.state.optimizer.step},
        {"best_val_loss", hex_double(c.state.best_val_loss)},
        {"epochs_since_improvement", c.state.epochs_since_improvement},
        {"rng_state", c.state.rng_state}}},
      {"blob", {{"file", kBlob}, {"size_bytes", blob.size()}, {"crc32", crc_of(blob.data(), blob.size())}}},
      {"tensors", entries}};

  write_file_atomic(dir / kBlob, std::string(blob.begin(), blob.end()));
  write_file_atomic(dir / kManifest, manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& dir) {
  json manifest;
  {
    std::ifstream in(dir / kManifest);
    if (!in) throw DataError("cannot open " + (dir / kManifest).string());
    try {
      manifest = json::parse(in);
    } catch (const std::exception& e) {
      throw DataError("malformed checkpoint manifest: " + std::string(e.what()));
    }
  }
  try {
    if (manifest.at("format").get<std::string>() != kFormat)
      throw DataError("not a medattn checkpoint: " + dir.string());
    const int version = manifest.at("version").get<int>();
    if (version != kCheckpointVersion)
      throw DataError("incompatible checkpoint version " + std::to_string(version) +
                      " (this build reads version " + std::to_string(kCheckpointVersion) + ")");

    Checkpoint c;
    c.format_version = version;
    c.model = model_from_json(manifest.at("model"));
    c.model.validate();
    c.train = train_from_json(manifest.at("train"));
    const json& st = manifest.at("state");
    c.state.epoch = st.at("epoch").get<std::size_t>();
    c.state.best_val_loss = parse_hex_double(st.at("best_val_loss").get<std::string>());
    c.state.epochs_since_improvement = st.at("epochs_since_improvement").get<std::size_t>();
    c.state.rng_state = st.at("rng_state").get<std::string>();
    c.params = init_params(c.model);
    c.state.optimizer = OptimizerState::zeros_like(c.params.tensors());
    c.state.optimizer.step = st.at("optimizer_step").get<std::uint64_t>();

    std::ifstream in(dir / kBlob, std::ios::binary);
    if (!in) throw DataError("cannot open " + (dir / kBlob).string());
    const std::vector<unsigned char> blob((std::istreambuf_iterator<char>(in)),
                                          std::istreambuf_iterator<char>());
    const json& bj = manifest.at("blob");
    const auto expected_size = bj.at("size_bytes").get<std::size_t>();
    if (blob.size() != expected_size)
      throw DataError("checkpoint blob " + (dir / kBlob).string() + " has " +
                      std::to_string(blob.size()) + " bytes, manifest expects " +
                      std::to_string(expected_size));
    if (crc_of(blob.data(), blob.size()) != bj.at("crc32").get<std::uint32_t>())
      throw DataError("checkpoint blob checksum mismatch in " + dir.string());

    const json& entries = manifest.at("tensors");
    auto slots = stored_tensors(c);
    if (entries.size() != slots.size())
      throw DataError("checkpoint lists " + std::to_string(entries.size()) + " tensors, model needs " +
                      std::to_string(slots.size()));
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const json& e = entries[i];
      const auto name = e.at("name").get<std::string>();
      if (name != slots[i].name)
        throw DataError("checkpoint tensor #" + std::to_string(i) + " is '" + name +
                        "', expected '" + slots[i].name + "'");
      if (e.at("shape").get<Shape>() != slots[i].tensor->shape())
        throw DataError("checkpoint tensor '" + name + "' has the wrong shape");
      const auto offset = e.at("offset").get<std::size_t>();
      const auto count = e.at("count").get<std::size_t>();
      if (count != slots[i].tensor->size() || offset + count * 8 > blob.size())
        throw DataError("checkpoint tensor '" + name + "' lies outside the blob");
      if (crc_of(blob.data() + offset, count * 8) != e.at("crc32").get<std::uint32_t>())
        throw DataError("checksum mismatch for checkpoint tensor '" + name + "'");
      read_le(blob.data() + offset, *slots[i].tensor);
    }
    return c;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError("malformed checkpoint manifest in " + dir.string() + ": " + e.what());
  }
}

}  // namespace medattn
