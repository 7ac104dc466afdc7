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

// Clinical-note preprocessing: deduplication, rule-based de-identification,
// ICD code normalization, sentence segmentation, word tokenization,
// vocabulary construction and fixed-length encoding.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace medattn {

struct RawRecord {
  std::string id;
  std::string text;
  std::vector<std::string> labels;  // raw diagnosis codes

  friend bool operator==(const RawRecord&, const RawRecord&) = default;
};

/// Token <-> id mapping. Id 0 is PAD and id 1 is UNK in every vocabulary.
class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();
  /// Rebuilds a vocabulary from tokens listed in id order (as in vocab.txt).
  /// Throws DataError unless the list starts with the PAD and UNK tokens and
  /// has no duplicates.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::int32_t id(std::string_view token) const;
  const std::string& token(std::int32_t id) const;
  bool contains(std::string_view token) const;
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  void add(std::string token);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

struct EncodedExample {
  std::vector<std::int32_t> ids;     // length max_len, PAD-filled
  std::vector<std::uint8_t> mask;    // 1 where ids holds a real token
  std::vector<std::uint8_t> labels;  // length m, entries 0/1

  friend bool operator==(const EncodedExample&, const EncodedExample&) = default;
};

/// One retained record after preprocessing. `tokens` keeps the untruncated
/// token sequence so evaluation-time perturbations can re-encode it.
struct CorpusEntry {
  std::string id;
  std::vector<std::string> tokens;
  EncodedExample example;

  friend bool operator==(const CorpusEntry&, const CorpusEntry&) = default;
};

struct PreprocessSettings {
  std::size_t min_tokens = 5;
  std::size_t max_len = 256;
  std::size_t min_freq = 1;
  std::size_t max_vocab = 20000;
};

struct PreprocessSummary {
  std::size_t input = 0;
  std::size_t duplicates = 0;
  std::size_t too_short = 0;
  std::size_t no_labels = 0;
  std::size_t retained = 0;

  friend bool operator==(const PreprocessSummary&, const PreprocessSummary&) = default;
};

struct PreprocessedCorpus {
  std::vector<CorpusEntry> entries;
  Vocabulary vocab;
  std::vector<std::string> label_space;
  std::size_t max_len = 0;
  PreprocessSummary summary;

  friend bool operator==(const PreprocessedCorpus&, const PreprocessedCorpus&) = default;
};

// --- individual stages -------------------------------------------------------

/// Keeps the first record of every group whose texts are equal after
/// lowercasing and whitespace collapsing.
std::vector<RawRecord> deduplicate(const std::vector<RawRecord>& records);

/// Replaces dates with [DATE], digit runs of six or more with [ID], and the
/// capitalized word after Dr./Mr./Mrs./Ms. with [NAME], in that order.
std::string deidentify(const std::string& text);

/// Uppercases, trims, removes dots, drops empties, and dedups in order.
std::vector<std::string> normalize_codes(const std::vector<std::string>& codes);

std::vector<std::string> segment_sentences(std::string_view text);

/// Lowercase ASCII word tokens split at every non-alphanumeric byte.
std::vector<std::string> tokenize(std::string_view text);

/// Tokens with frequency >= min_freq ordered by (frequency desc, token asc),
/// truncated so that the vocabulary including PAD/UNK has at most max_size
/// entries.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, std::size_t min_freq,
                       std::size_t max_size);

/// Truncates to max_len, maps OOV tokens to UNK and right-pads with PAD.
/// Fills ids and mask only; labels stay empty.
EncodedExample encode(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                      std::size_t max_len);

struct LabelVector {
  std::vector<std::uint8_t> values;
  std::size_t out_of_space = 0;  // codes not present in the label space
};

LabelVector vectorize_labels(const std::vector<std::string>& codes,
                             const std::vector<std::string>& label_space);

/// De-identification, segmentation and tokenization of one note: the same
/// text path preprocess_corpus applies before filtering.
std::vector<std::string> note_tokens(const std::string& text);

/// Full pipeline: dedup -> de-identify -> segment -> tokenize -> filter ->
/// vocabulary -> encode. Throws DataError when nothing survives filtering.
PreprocessedCorpus preprocess_corpus(const std::vector<RawRecord>& records,
                                     const PreprocessSettings& settings);

// --- files -------------------------------------------------------------------

/// Reads {"id", "text", "labels"} objects, one per line. Blank lines are
/// skipped; anything else malformed is a DataError naming the line.
std::vector<RawRecord> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<RawRecord>& records);

/// Writes dataset.jsonl, vocab.txt, labels.txt and summary.json into `dir`.
void write_corpus(const std::filesystem::path& dir, const PreprocessedCorpus& corpus);
PreprocessedCorpus read_corpus(const std::filesystem::path& dir);

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);
std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace medattn
