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

#include "medattn/text_pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <unordered_set>

#include "json.hpp"
#include "medattn/errors.hpp"

namespace medattn {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kDatasetVersion = 1;
constexpr std::string_view kDatasetFormat = "medattn-encoded";

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }
char upper(char c) { return static_cast<char>(std::toupper(static_cast<unsigned char>(c))); }

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string dedup_key(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(lower(c));
  }
  return out;
}

}  // namespace

// --- Vocabulary ---------------------------------------------------------------

Vocabulary::Vocabulary() {
  add(std::string(kPadToken));
  add(std::string(kUnkToken));
}

void Vocabulary::add(std::string token) {
  index_.emplace(token, static_cast<std::int32_t>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kUnkToken) {
    throw DataError("vocabulary must start with " + std::string(kPadToken) + " and " +
                    std::string(kUnkToken));
  }
  Vocabulary v;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) throw DataError("vocabulary has duplicate token '" + tokens[i] + "'");
    v.add(std::move(tokens[i]));
  }
  return v;
}

std::int32_t Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DataError("vocabulary id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) != 0;
}

// --- stages -----------------------------------------------------------------

std::vector<RawRecord> deduplicate(const std::vector<RawRecord>& records) {
  std::unordered_set<std::string> seen;
  std::vector<RawRecord> out;
  for (const auto& r : records) {
    if (seen.insert(dedup_key(r.text)).second) out.push_back(r);
  }
  return out;
}

std::string deidentify(const std::string& text) {
  static const std::regex numeric_date(R"(\b\d{1,2}/\d{1,2}/\d{2,4}\b)");
  static const std::regex written_date(
      R"(\b(January|February|March|April|May|June|July|August|September|October|November|December) \d{1,2}, \d{4}\b)");
  static const std::regex long_digits(R"(\d{6,})");
  static const std::regex honorific_name(R"(\b(Dr|Mr|Mrs|Ms)\. [A-Z][A-Za-z'-]*)");

  std::string out = std::regex_replace(text, numeric_date, "[DATE]");
  out = std::regex_replace(out, written_date, "[DATE]");
  out = std::regex_replace(out, long_digits, "[ID]");
  out = std::regex_replace(out, honorific_name, "$1. [NAME]");
  return out;
}

std::vector<std::string> normalize_codes(const std::vector<std::string>& codes) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& raw : codes) {
    std::string code;
    for (char c : trim(raw)) {
      if (c != '.') code.push_back(upper(c));
    }
    if (code.empty()) continue;
    if (seen.insert(code).second) out.push_back(std::move(code));
  }
  return out;
}

std::vector<std::string> segment_sentences(std::string_view text) {
  static const std::set<std::string> kAbbreviations = {"dr", "mr", "mrs", "ms", "vs"};
  std::vector<std::string> out;
  auto emit = [&](std::size_t b, std::size_t e) {
    std::string seg = trim(text.substr(b, e - b));
    if (!seg.empty()) out.push_back(std::move(seg));
  };

  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    bool split = false;
    if (c == '\n') {
      split = true;
    } else if (c == '.' || c == '!' || c == '?' || c == ';') {
      split = i + 1 == text.size() || is_space(text[i + 1]);
      if (split && c == '.') {
        std::size_t w = i;
        while (w > start && is_alpha(text[w - 1])) --w;
        std::string word;
        for (std::size_t k = w; k < i; ++k) word.push_back(lower(text[k]));
        if (kAbbreviations.count(word)) split = false;
      }
    }
    if (split) {
      emit(start, i);
      start = i + 1;
    }
  }
  emit(start, text.size());
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (is_alnum(c)) {
      cur.push_back(lower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, std::size_t min_freq,
                       std::size_t max_size) {
  if (min_freq < 1) throw UsageError("build_vocab: min_freq must be >= 1");
  if (max_size < 3) throw UsageError("build_vocab: max_size must be >= 3");
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& doc : corpus)
    for (const auto& t : doc) ++freq[t];

  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : freq) {
    if (n >= min_freq && tok != Vocabulary::kPadToken && tok != Vocabulary::kUnkToken)
      ranked.emplace_back(tok, n);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (ranked.size() > max_size - 2) ranked.resize(max_size - 2);

  std::vector<std::string> tokens{std::string(Vocabulary::kPadToken),
                                  std::string(Vocabulary::kUnkToken)};
  for (auto& [tok, n] : ranked) tokens.push_back(std::move(tok));
  return Vocabulary::from_tokens(std::move(tokens));
}

EncodedExample encode(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                      std::size_t max_len) {
  if (max_len < 1) throw UsageError("encode: max_len must be >= 1");
  if (tokens.empty()) throw DataError("encode: empty token list");
  EncodedExample ex;
  ex.ids.assign(max_len, Vocabulary::kPad);
  ex.mask.assign(max_len, 0);
  const std::size_t n = std::min(tokens.size(), max_len);
  for (std::size_t i = 0; i < n; ++i) {
    ex.ids[i] = vocab.id(tokens[i]);
    ex.mask[i] = 1;
  }
  return ex;
}

LabelVector vectorize_labels(const std::vector<std::string>& codes,
                             const std::vector<std::string>& label_space) {
  if (label_space.empty()) throw UsageError("vectorize_labels: empty label space");
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < label_space.size(); ++j) {
    if (!index.emplace(label_space[j], j).second)
      throw UsageError("vectorize_labels: duplicate label '" + label_space[j] + "'");
  }
  LabelVector out;
  out.values.assign(label_space.size(), 0);
  for (const auto& c : codes) {
    auto it = index.find(c);
    if (it == index.end()) {
      ++out.out_of_space;
    } else {
      out.values[it->second] = 1;
    }
  }
  return out;
}

std::vector<std::string> note_tokens(const std::string& text) {
  const auto sentences = segment_sentences(deidentify(text));
  std::string joined;
  for (const auto& s : sentences) {
    if (!joined.empty()) joined.push_back(' ');
    joined += s;
  }
  return tokenize(joined);
}

PreprocessedCorpus preprocess_corpus(const std::vector<RawRecord>& records,
                                     const PreprocessSettings& settings) {
  PreprocessedCorpus out;
  out.max_len = settings.max_len;
  out.summary.input = records.size();
  const auto unique = deduplicate(records);
  out.summary.duplicates = records.size() - unique.size();

  struct Kept {
    std::string id;
    std::vector<std::string> tokens;
    std::vector<std::string> codes;
  };
  std::vector<Kept> kept;
  for (const auto& r : unique) {
    auto tokens = note_tokens(r.text);
    auto codes = normalize_codes(r.labels);
    if (tokens.empty() || tokens.size() < settings.min_tokens) {
      ++out.summary.too_short;
      continue;
    }
    if (codes.empty()) {
      ++out.summary.no_labels;
      continue;
    }
    kept.push_back({r.id, std::move(tokens), std::move(codes)});
  }
  out.summary.retained = kept.size();
  if (kept.empty()) throw DataError("preprocess: no records survived filtering");

  std::set<std::string> labels;
  std::vector<std::vector<std::string>> docs;
  docs.reserve(kept.size());
  for (const auto& k : kept) {
    labels.insert(k.codes.begin(), k.codes.end());
    docs.push_back(k.tokens);
  }
  out.label_space.assign(labels.begin(), labels.end());
  out.vocab = build_vocab(docs, settings.min_freq, settings.max_vocab);

  out.entries.reserve(kept.size());
  for (auto& k : kept) {
    CorpusEntry e;
    e.example = encode(k.tokens, out.vocab, settings.max_len);
    e.example.labels = vectorize_labels(k.codes, out.label_space).values;
    e.id = std::move(k.id);
    e.tokens = std::move(k.tokens);
    out.entries.push_back(std::move(e));
  }
  return out;
}

// --- files ------------------------------------------------------------------

std::vector<RawRecord> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<RawRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      RawRecord r;
      r.id = j.at("id").get<std::string>();
      r.text = j.at("text").get<std::string>();
      r.labels = j.at("labels").get<std::vector<std::string>>();
      if (r.id.empty()) throw DataError("empty id");
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_jsonl(const fs::path& path, const std::vector<RawRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : records) {
    json j = {{"id", r.id}, {"text", r.text}, {"labels", r.labels}};
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

void write_corpus(const fs::path& dir, const PreprocessedCorpus& corpus) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "dataset.jsonl", std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / "dataset.jsonl").string());
    json header = {{"format", kDatasetFormat},
                   {"version", kDatasetVersion},
                   {"max_len", corpus.max_len},
                   {"n_labels", corpus.label_space.size()},
                   {"vocab_size", corpus.vocab.size()},
                   {"count", corpus.entries.size()}};
    out << header.dump() << '\n';
    for (const auto& e : corpus.entries) {
      json j = {{"id", e.id},
                {"tokens", e.tokens},
                {"ids", e.example.ids},
                {"mask", e.example.mask},
                {"labels", e.example.labels}};
      out << j.dump() << '\n';
    }
    if (!out) throw DataError("write failed: " + (dir / "dataset.jsonl").string());
  }
  write_lines(dir / "vocab.txt", corpus.vocab.tokens());
  write_lines(dir / "labels.txt", corpus.label_space);
  const auto& s = corpus.summary;
  json summary = {{"input", s.input},         {"duplicates", s.duplicates},
                  {"too_short", s.too_short}, {"no_labels", s.no_labels},
                  {"retained", s.retained}};
  std::ofstream(dir / "summary.json", std::ios::binary) << summary.dump(2) << '\n';
}

PreprocessedCorpus read_corpus(const fs::path& dir) {
  PreprocessedCorpus corpus;
  corpus.vocab = Vocabulary::from_tokens(read_lines(dir / "vocab.txt"));
  corpus.label_space = read_lines(dir / "labels.txt");
  if (corpus.label_space.empty()) throw DataError("labels.txt is empty in " + dir.string());

  const fs::path data = dir / "dataset.jsonl";
  std::ifstream in(data, std::ios::binary);
  if (!in) throw DataError("cannot open " + data.string());
  std::string line;
  std::size_t lineno = 0;
  std::size_t expected = 0;
  try {
    if (!std::getline(in, line)) throw DataError("missing header");
    ++lineno;
    const json header = json::parse(line);
    if (header.at("format").get<std::string>() != kDatasetFormat)
      throw DataError("not an encoded dataset");
    if (header.at("version").get<int>() != kDatasetVersion)
      throw DataError("unsupported dataset version " + header.at("version").dump());
    corpus.max_len = header.at("max_len").get<std::size_t>();
    expected = header.at("count").get<std::size_t>();
    if (header.at("n_labels").get<std::size_t>() != corpus.label_space.size())
      throw DataError("n_labels disagrees with labels.txt");
    if (header.at("vocab_size").get<std::size_t>() != corpus.vocab.size())
      throw DataError("vocab_size disagrees with vocab.txt");
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      const json j = json::parse(line);
      CorpusEntry e;
      e.id = j.at("id").get<std::string>();
      e.tokens = j.at("tokens").get<std::vector<std::string>>();
      e.example.ids = j.at("ids").get<std::vector<std::int32_t>>();
      e.example.mask = j.at("mask").get<std::vector<std::uint8_t>>();
      e.example.labels = j.at("labels").get<std::vector<std::uint8_t>>();
      if (e.example.ids.size() != corpus.max_len || e.example.mask.size() != corpus.max_len ||
          e.example.labels.size() != corpus.label_space.size())
        throw DataError("record '" + e.id + "' has inconsistent lengths");
      for (auto id : e.example.ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= corpus.vocab.size())
          throw DataError("record '" + e.id + "' has token id outside the vocabulary");
      }
      corpus.entries.push_back(std::move(e));
    }
  } catch (const DataError& e) {
    throw DataError(data.string() + ":" + std::to_string(lineno) + ": " + e.what());
  } catch (const std::exception& e) {
    throw DataError(data.string() + ":" + std::to_string(lineno) + ": " + e.what());
  }
  if (corpus.entries.size() != expected) {
    throw DataError(data.string() + ": header promises " + std::to_string(expected) +
                    " records, found " + std::to_string(corpus.entries.size()));
  }
  corpus.summary.retained = corpus.entries.size();
  if (std::ifstream s(dir / "summary.json"); s) {
    try {
      const json j = json::parse(s);
      corpus.summary.input = j.value("input", std::size_t{0});
      corpus.summary.duplicates = j.value("duplicates", std::size_t{0});
      corpus.summary.too_short = j.value("too_short", std::size_t{0});
      corpus.summary.no_labels = j.value("no_labels", std::size_t{0});
    } catch (const std::exception&) {
      throw DataError("malformed " + (dir / "summary.json").string());
    }
  }
  return corpus;
}

}  // namespace medattn
