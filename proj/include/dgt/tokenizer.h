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

#ifndef DGT_TOKENIZER_H_
#define DGT_TOKENIZER_H_

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dgt/tensor.h"

namespace dgt {

// Byte-level id space with district tokens appended after the byte range:
//
//   0 pad | 1 eos | 2 unk | 3..258 bytes 0x00..0xFF | 259.. districts
//
// District ids are handed out contiguously in registration order and never
// change once assigned, so a saved label list reproduces the id mapping.
class Vocabulary {
 public:
  static constexpr TokenId kPadId = 0;
  static constexpr TokenId kEosId = 1;
  static constexpr TokenId kUnkId = 2;
  static constexpr TokenId kByteOffset = 3;
  static constexpr std::size_t kBaseSize = 259;

  Vocabulary() = default;
  explicit Vocabulary(std::span<const std::string> district_labels);

  std::size_t size() const { return kBaseSize + districts_.size(); }

  // Adds labels not yet present, in iteration order. Returns the new size.
  std::size_t register_districts(std::span<const std::string> labels);

  bool has_district(std::string_view label) const;
  TokenId district_id(std::string_view label) const;
  const std::vector<std::string>& district_labels() const { return districts_; }
  bool is_district_id(TokenId id) const;

  // "<label>"
  static std::string surface_form(std::string_view label);
  // Throws ValidationError naming the label when it is empty, not UTF-8,
  // or contains '<', '>' or whitespace.
  static void validate_label(std::string_view label);

 private:
  std::vector<std::string> districts_;
  std::map<std::string, TokenId, std::less<>> ids_;
};

inline TokenId byte_to_id(unsigned char b) { return static_cast<TokenId>(b) + Vocabulary::kByteOffset; }

// [district?] ++ [byte + 3 ...] ++ [eos]
std::vector<TokenId> encode(const Vocabulary& vocab, std::string_view text,
                            std::optional<std::string_view> district = std::nullopt);

struct DecodedText {
  std::string text;
  // True when the byte stream was not valid UTF-8 and U+FFFD was substituted.
  bool replaced_invalid = false;
};

// Drops special and district ids and maps the rest back to bytes. Throws
// UnknownIdError for ids outside the vocabulary.
DecodedText decode_ids(const Vocabulary& vocab, std::span<const TokenId> ids);

inline std::string decode(const Vocabulary& vocab, std::span<const TokenId> ids) {
  return decode_ids(vocab, ids).text;
}

}  // namespace dgt

#endif  // DGT_TOKENIZER_H_
