// Copyright 2026 The DGT Authors. All Rights Reserved.
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

#ifndef DGT_CORPUS_H_
#define DGT_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dgt/tokenizer.h"

namespace dgt {

struct Example {
  std::int64_t index = 0;
  std::string district;
  std::string contents;
  std::optional<std::string> ipa;
};

struct Prediction {
  std::int64_t index = 0;
  std::string ipa;
};

// Comma-separated records with double-quote quoting ("" escapes a quote
// inside a quoted field). LF and CRLF line ends are accepted and a leading
// UTF-8 byte order mark is ignored. Returns records including the header.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);
std::string csv_escape(std::string_view field);

// Columns index, district, contents and (when expect_targets) ipa, located
// by header name. Throws SchemaError for a missing column and ParseError with
// the record number for malformed rows.
std::vector<Example> parse_corpus(std::string_view text, bool expect_targets);
std::vector<Example> load_corpus(const std::filesystem::path& path, bool expect_targets);

// Writes index,district,contents[,ipa]; ipa is written when with_ipa is set.
void write_corpus(const std::filesystem::path& path, const std::vector<Example>& examples, bool with_ipa);

// Prediction files hold index,ipa.
std::vector<Prediction> parse_predictions(std::string_view text);
std::vector<Prediction> load_predictions(const std::filesystem::path& path);
void write_predictions(const std::filesystem::path& path, const std::vector<Prediction>& predictions);

std::string read_file(const std::filesystem::path& path);

struct ColumnStats {
  std::size_t max_len = 0;
  std::size_t min_len = 0;
  double mean_len = 0.0;
  double median_len = 0.0;
  std::size_t unique_words = 0;
};

// Lengths are in codepoints; words are whitespace-separated types.
ColumnStats compute_column_stats(const std::vector<std::string>& texts);

struct CorpusStats {
  ColumnStats train_contents;
  std::optional<ColumnStats> train_ipa;  // when every train row has ipa
  std::optional<ColumnStats> test_contents;
  std::optional<ColumnStats> test_ipa;
  // Test contents word types absent from the train contents word types.
  std::optional<std::size_t> oov_count;
  std::optional<double> oov_rate;  // fraction in [0, 1]
};

CorpusStats compute_stats(const std::vector<Example>& train,
                          const std::vector<Example>* test = nullptr);

struct EncodedExample {
  std::vector<TokenId> source;
  std::vector<TokenId> target;
};

// source = encode(contents, district) (district omitted when with_district is
// false, which is the unconditioned ablation); target = encode(ipa).
std::vector<EncodedExample> attach_dgt(const std::vector<Example>& examples, const Vocabulary& vocab,
                                       bool with_district = true);

// Labels in first-appearance order.
std::vector<std::string> district_labels(const std::vector<Example>& examples);

}  // namespace dgt

#endif  // DGT_CORPUS_H_
