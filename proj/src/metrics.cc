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

#include "dgt/metrics.h"

#include <algorithm>

#include "dgt/error.h"
#include "dgt/utf8.h"

namespace dgt {

double WerBreakdown::wer() const {
  if (ref_words == 0) return 0.0;
  return static_cast<double>(errors()) / static_cast<double>(ref_words) * 100.0;
}

WerBreakdown& WerBreakdown::operator+=(const WerBreakdown& other) {
  substitutions += other.substitutions;
  deletions += other.deletions;
  insertions += other.insertions;
  ref_words += other.ref_words;
  skipped += other.skipped;
  return *this;
}

template <typename Token>
WerBreakdown align_tokens(const std::vector<Token>& reference, const std::vector<Token>& hypothesis) {
  const std::size_t n = reference.size(), m = hypothesis.size();
  const std::size_t cols = m + 1;
  std::vector<std::size_t> cost((n + 1) * cols);
  for (std::size_t i = 0; i <= n; ++i) cost[i * cols] = i;
  for (std::size_t j = 0; j <= m; ++j) cost[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = cost[(i - 1) * cols + j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
      const std::size_t del = cost[(i - 1) * cols + j] + 1;
      const std::size_t ins = cost[i * cols + j - 1] + 1;
      cost[i * cols + j] = std::min({diag, del, ins});
    }
  }
  WerBreakdown result;
  result.ref_words = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    const std::size_t here = cost[i * cols + j];
    if (i > 0 && j > 0) {
      const bool same = reference[i - 1] == hypothesis[j - 1];
      if (cost[(i - 1) * cols + j - 1] + (same ? 0 : 1) == here) {
        if (!same) ++result.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && cost[(i - 1) * cols + j] + 1 == here) {
      ++result.deletions;
      --i;
      continue;
    }
    ++result.insertions;
    --j;
  }
  return result;
}

template WerBreakdown align_tokens(const std::vector<std::string>&, const std::vector<std::string>&);
template WerBreakdown align_tokens(const std::vector<char32_t>&, const std::vector<char32_t>&);
template WerBreakdown align_tokens(const std::vector<int>&, const std::vector<int>&);

WerBreakdown wer(std::string_view reference, std::string_view hypothesis) {
  const auto ref = utf8::split_words(reference);
  if (ref.empty()) throw EmptyReferenceError();
  return align_tokens(ref, utf8::split_words(hypothesis));
}

WerBreakdown cer(std::string_view reference, std::string_view hypothesis) {
  const auto ref = utf8::decode(reference).codepoints;
  if (ref.empty()) throw EmptyReferenceError();
  return align_tokens(ref, utf8::decode(hypothesis).codepoints);
}

WerBreakdown corpus_wer(const std::vector<std::pair<std::string, std::string>>& pairs) {
  WerBreakdown total;
  for (const auto& [reference, hypothesis] : pairs) {
    try {
      total += wer(reference, hypothesis);
    } catch (const EmptyReferenceError&) {
      ++total.skipped;
    }
  }
  if (total.ref_words == 0) throw ContractError("corpus_wer: no pair has a nonempty reference");
  return total;
}

}  // namespace dgt
