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

#include "dgt/corpus.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "dgt/error.h"
#include "dgt/utf8.h"

namespace dgt {
namespace {

std::int64_t parse_index(const std::string& field, std::size_t row) {
  std::int64_t value = 0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw ParseError("index '" + field + "' is not an integer", row);
  }
  return value;
}

struct Header {
  std::map<std::string, std::size_t> columns;

  std::optional<std::size_t> find(const std::string& name) const {
    auto it = columns.find(name);
    if (it == columns.end()) return std::nullopt;
    return it->second;
  }
  std::size_t require(const std::string& name) const {
    auto col = find(name);
    if (!col) throw SchemaError("missing required column '" + name + "'");
    return *col;
  }
};

Header read_header(const std::vector<std::vector<std::string>>& records) {
  if (records.empty()) throw SchemaError("file is empty; expected a header row");
  Header header;
  for (std::size_t i = 0; i < records[0].size(); ++i) {
    std::string name = records[0][i];
    while (!name.empty() && (name.back() == ' ' || name.back() == '\t')) name.pop_back();
    while (!name.empty() && (name.front() == ' ' || name.front() == '\t')) name.erase(name.begin());
    if (!header.columns.emplace(name, i).second) throw SchemaError("duplicate column '" + name + "'");
  }
  return header;
}

void check_width(const std::vector<std::string>& record, std::size_t width, std::size_t row) {
  if (record.size() != width) {
    throw ParseError("expected " + std::to_string(width) + " fields, found " +
                         std::to_string(record.size()),
                     row);
  }
}

bool blank_record(const std::vector<std::string>& record) {
  return record.size() == 1 && record[0].empty();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

}  // namespace

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  std::size_t i = 0;
  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    records.push_back(std::move(record));
    record.clear();
    field_was_quoted = false;
  };
  while (i < text.size()) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          i += 2;
          continue;
        }
        in_quotes = false;
        ++i;
        continue;
      }
      field.push_back(c);
      ++i;
      continue;
    }
    if (c == '"') {
      if (!field.empty() || field_was_quoted) {
        throw ParseError("unexpected quote inside unquoted field", records.size() + 1);
      }
      in_quotes = true;
      field_was_quoted = true;
      ++i;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      field_was_quoted = false;
      ++i;
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      end_record();
      i += 2;
    } else if (c == '\n') {
      end_record();
      ++i;
    } else {
      if (field_was_quoted) throw ParseError("text after closing quote", records.size() + 1);
      field.push_back(c);
      ++i;
    }
  }
  if (in_quotes) throw ParseError("unterminated quoted field", records.size() + 1);
  if (!field.empty() || !record.empty() || field_was_quoted) end_record();
  return records;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<Example> parse_corpus(std::string_view text, bool expect_targets) {
  const auto records = parse_csv(text);
  const Header header = read_header(records);
  const std::size_t index_col = header.require("index");
  const std::size_t district_col = header.require("district");
  const std::size_t contents_col = header.require("contents");
  const std::optional<std::size_t> ipa_col =
      expect_targets ? std::optional<std::size_t>(header.require("ipa")) : header.find("ipa");
  const std::size_t width = records[0].size();

  std::vector<Example> examples;
  std::unordered_set<std::int64_t> seen;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& record = records[r];
    const std::size_t row = r + 1;
    if (blank_record(record)) continue;
    check_width(record, width, row);
    for (const auto& field : record) {
      if (!utf8::is_valid(field)) throw ParseError("field is not valid UTF-8", row);
    }
    Example ex;
    ex.index = parse_index(record[index_col], row);
    if (!seen.insert(ex.index).second) {
      throw ParseError("duplicate index " + std::to_string(ex.index), row);
    }
    ex.district = record[district_col];
    if (ex.district.empty()) throw ParseError("empty district", row);
    ex.contents = record[contents_col];
    if (ex.contents.empty()) throw ParseError("empty contents", row);
    if (ipa_col) {
      ex.ipa = record[*ipa_col];
      if (expect_targets && ex.ipa->empty()) throw ParseError("empty ipa target", row);
    }
    examples.push_back(std::move(ex));
  }
  return examples;
}

std::vector<Example> load_corpus(const std::filesystem::path& path, bool expect_targets) {
  return parse_corpus(read_file(path), expect_targets);
}

void write_corpus(const std::filesystem::path& path, const std::vector<Example>& examples, bool with_ipa) {
  std::string out = with_ipa ? "index,district,contents,ipa\n" : "index,district,contents\n";
  for (const auto& ex : examples) {
    out += std::to_string(ex.index) + "," + csv_escape(ex.district) + "," + csv_escape(ex.contents);
    if (with_ipa) out += "," + csv_escape(ex.ipa.value_or(""));
    out += "\n";
  }
  write_text(path, out);
}

std::vector<Prediction> parse_predictions(std::string_view text) {
  const auto records = parse_csv(text);
  const Header header = read_header(records);
  const std::size_t index_col = header.require("index");
  const std::size_t ipa_col = header.require("ipa");
  const std::size_t width = records[0].size();
  std::vector<Prediction> predictions;
  std::unordered_set<std::int64_t> seen;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const std::size_t row = r + 1;
    if (blank_record(records[r])) continue;
    check_width(records[r], width, row);
    Prediction p{parse_index(records[r][index_col], row), records[r][ipa_col]};
    if (!seen.insert(p.index).second) throw ParseError("duplicate index " + std::to_string(p.index), row);
    predictions.push_back(std::move(p));
  }
  return predictions;
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  return parse_predictions(read_file(path));
}

void write_predictions(const std::filesystem::path& path, const std::vector<Prediction>& predictions) {
  std::string out = "index,ipa\n";
  for (const auto& p : predictions) out += std::to_string(p.index) + "," + csv_escape(p.ipa) + "\n";
  write_text(path, out);
}

ColumnStats compute_column_stats(const std::vector<std::string>& texts) {
  ColumnStats stats;
  if (texts.empty()) return stats;
  std::vector<std::size_t> lengths;
  lengths.reserve(texts.size());
  std::set<std::string> words;
  double total = 0.0;
  for (const auto& text : texts) {
    lengths.push_back(utf8::codepoint_count(text));
    total += static_cast<double>(lengths.back());
    for (auto& w : utf8::split_words(text)) words.insert(std::move(w));
  }
  std::sort(lengths.begin(), lengths.end());
  stats.min_len = lengths.front();
  stats.max_len = lengths.back();
  stats.mean_len = total / static_cast<double>(lengths.size());
  const std::size_t mid = lengths.size() / 2;
  stats.median_len = lengths.size() % 2 == 1
                         ? static_cast<double>(lengths[mid])
                         : (static_cast<double>(lengths[mid - 1]) + static_cast<double>(lengths[mid])) / 2.0;
  stats.unique_words = words.size();
  return stats;
}

namespace {

std::set<std::string> word_types(const std::vector<Example>& examples) {
  std::set<std::string> words;
  for (const auto& ex : examples) {
    for (auto& w : utf8::split_words(ex.contents)) words.insert(std::move(w));
  }
  return words;
}

std::optional<ColumnStats> ipa_stats(const std::vector<Example>& examples) {
  std::vector<std::string> ipa;
  for (const auto& ex : examples) {
    if (!ex.ipa) return std::nullopt;
    ipa.push_back(*ex.ipa);
  }
  if (ipa.empty()) return std::nullopt;
  return compute_column_stats(ipa);
}

std::vector<std::string> contents_of(const std::vector<Example>& examples) {
  std::vector<std::string> contents;
  contents.reserve(examples.size());
  for (const auto& ex : examples) contents.push_back(ex.contents);
  return contents;
}

}  // namespace

CorpusStats compute_stats(const std::vector<Example>& train, const std::vector<Example>* test) {
  if (train.empty()) throw ContractError("compute_stats: empty training corpus");
  CorpusStats stats;
  stats.train_contents = compute_column_stats(contents_of(train));
  stats.train_ipa = ipa_stats(train);
  if (test != nullptr && !test->empty()) {
    stats.test_contents = compute_column_stats(contents_of(*test));
    stats.test_ipa = ipa_stats(*test);
    const auto train_words = word_types(train);
    const auto test_words = word_types(*test);
    std::size_t oov = 0;
    for (const auto& w : test_words) oov += train_words.count(w) == 0 ? 1 : 0;
    stats.oov_count = oov;
    stats.oov_rate = test_words.empty() ? 0.0 : static_cast<double>(oov) / static_cast<double>(test_words.size());
  }
  return stats;
}

std::vector<EncodedExample> attach_dgt(const std::vector<Example>& examples, const Vocabulary& vocab,
                                       bool with_district) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    if (!ex.ipa) throw ContractError("attach_dgt: example " + std::to_string(ex.index) + " has no ipa target");
    EncodedExample enc;
    enc.source = with_district ? encode(vocab, ex.contents, ex.district) : encode(vocab, ex.contents);
    enc.target = encode(vocab, *ex.ipa);
    out.push_back(std::move(enc));
  }
  return out;
}

std::vector<std::string> district_labels(const std::vector<Example>& examples) {
  std::vector<std::string> labels;
  std::unordered_set<std::string> seen;
  for (const auto& ex : examples) {
    if (seen.insert(ex.district).second) labels.push_back(ex.district);
  }
  return labels;
}

}  // namespace dgt
