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

#ifndef DGT_UTF8_H_
#define DGT_UTF8_H_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace dgt::utf8 {

inline constexpr char32_t kReplacement = 0xFFFD;

struct DecodeResult {
  std::vector<char32_t> codepoints;
  // Number of ill-formed sequences that were replaced with U+FFFD.
  std::size_t invalid = 0;
};

// Lenient decoder: each maximal ill-formed subsequence becomes one U+FFFD.
DecodeResult decode(std::string_view text);

void append(std::string& out, char32_t cp);
std::string encode(const std::vector<char32_t>& codepoints);

bool is_valid(std::string_view text);

std::size_t codepoint_count(std::string_view text);

bool is_whitespace(char32_t cp);

// Splits on Unicode whitespace; runs of whitespace collapse and leading or
// trailing whitespace yields no empty words.
std::vector<std::string> split_words(std::string_view text);

}  // namespace dgt::utf8

#endif  // DGT_UTF8_H_
