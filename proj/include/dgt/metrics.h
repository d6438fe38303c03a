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

#ifndef DGT_METRICS_H_
#define DGT_METRICS_H_

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dgt {

struct WerBreakdown {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_words = 0;
  // Pairs left out of a corpus total because their reference was empty.
  std::size_t skipped = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  std::size_t correct() const { return ref_words - substitutions - deletions; }
  // (S + D + I) / N * 100. May exceed 100.
  double wer() const;

  WerBreakdown& operator+=(const WerBreakdown& other);
  bool operator==(const WerBreakdown&) const = default;
};

// Minimum unit-cost alignment of two token sequences. Among equal-cost
// alignments the backtrace prefers diagonal (match or substitution), then
// deletion, then insertion, which fixes the S/D/I split.
template <typename Token>
WerBreakdown align_tokens(const std::vector<Token>& reference, const std::vector<Token>& hypothesis);

// Word error rate over whitespace-separated words, compared verbatim.
// Throws EmptyReferenceError when the reference has no words.
WerBreakdown wer(std::string_view reference, std::string_view hypothesis);

// Character error rate over Unicode codepoints, whitespace included.
WerBreakdown cer(std::string_view reference, std::string_view hypothesis);

// Micro-average: S, D, I and N are summed before the ratio is taken. Pairs
// with an empty reference are skipped and counted in `skipped`; if every
// reference is empty a ContractError is thrown.
WerBreakdown corpus_wer(const std::vector<std::pair<std::string, std::string>>& pairs);

}  // namespace dgt

#endif  // DGT_METRICS_H_
