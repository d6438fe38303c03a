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

#include "dgt/tokenizer.h"

#include "dgt/error.h"
#include "dgt/utf8.h"

namespace dgt {

Vocabulary::Vocabulary(std::span<const std::string> district_labels) {
  register_districts(district_labels);
}

void Vocabulary::validate_label(std::string_view label) {
  const std::string quoted = "'" + std::string(label) + "'";
  if (label.empty()) throw ValidationError("district label must be nonempty");
  const auto decoded = utf8::decode(label);
  if (decoded.invalid > 0) throw ValidationError("district label " + quoted + " is not valid UTF-8");
  for (char32_t cp : decoded.codepoints) {
    if (cp == U'<' || cp == U'>' || utf8::is_whitespace(cp)) {
      throw ValidationError("district label " + quoted + " contains '<', '>' or whitespace");
    }
  }
}

std::size_t Vocabulary::register_districts(std::span<const std::string> labels) {
  for (const auto& label : labels) validate_label(label);
  for (const auto& label : labels) {
    if (ids_.count(label)) continue;
    ids_.emplace(label, static_cast<TokenId>(size()));
    districts_.push_back(label);
  }
  return size();
}

bool Vocabulary::has_district(std::string_view label) const { return ids_.find(label) != ids_.end(); }

TokenId Vocabulary::district_id(std::string_view label) const {
  auto it = ids_.find(label);
  if (it == ids_.end()) throw UnknownDistrictError(std::string(label));
  return it->second;
}

bool Vocabulary::is_district_id(TokenId id) const {
  return id >= static_cast<TokenId>(kBaseSize) && static_cast<std::size_t>(id) < size();
}

std::string Vocabulary::surface_form(std::string_view label) {
  return "<" + std::string(label) + ">";
}

std::vector<TokenId> encode(const Vocabulary& vocab, std::string_view text,
                            std::optional<std::string_view> district) {
  std::vector<TokenId> ids;
  ids.reserve(text.size() + 2);
  if (district) ids.push_back(vocab.district_id(*district));
  for (char c : text) ids.push_back(byte_to_id(static_cast<unsigned char>(c)));
  ids.push_back(Vocabulary::kEosId);
  return ids;
}

DecodedText decode_ids(const Vocabulary& vocab, std::span<const TokenId> ids) {
  std::string bytes;
  bytes.reserve(ids.size());
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab.size()) {
      throw UnknownIdError("token id " + std::to_string(id) + " outside vocabulary of size " +
                           std::to_string(vocab.size()));
    }
    if (id < Vocabulary::kByteOffset || vocab.is_district_id(id)) continue;
    bytes.push_back(static_cast<char>(id - Vocabulary::kByteOffset));
  }
  DecodedText result;
  const auto decoded = utf8::decode(bytes);
  if (decoded.invalid > 0) {
    result.text = utf8::encode(decoded.codepoints);
    result.replaced_invalid = true;
  } else {
    result.text = std::move(bytes);
  }
  return result;
}

}  // namespace dgt
