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

#ifndef DGT_SYNTHETIC_H_
#define DGT_SYNTHETIC_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dgt/corpus.h"

namespace dgt {

struct RewriteRule {
  std::string grapheme;
  std::string ipa;
};

struct DistrictRules {
  std::string district;
  std::vector<RewriteRule> rules;
};

// District-dependent grapheme rewriting. Application scans left to right in a
// single pass; at each position the longest matching grapheme wins (district
// rules before shared identity graphemes of equal length, earlier rules
// before later ones). Unmatched codepoints are copied through.
class RuleSet {
 public:
  RuleSet() = default;
  RuleSet(std::vector<DistrictRules> districts, std::vector<std::string> identity);

  const std::vector<DistrictRules>& districts() const { return districts_; }
  const std::vector<std::string>& identity() const { return identity_; }
  std::vector<std::string> district_labels() const;
  bool has_district(std::string_view label) const;

  // Every grapheme that appears in some district rule or the identity list,
  // sorted and deduplicated.
  std::vector<std::string> alphabet() const;
  // Graphemes whose rewrite differs between at least two districts.
  std::vector<std::string> ambiguous_graphemes() const;

  std::string apply(std::string_view word, std::string_view district) const;

  // Text format, one rule per line, '#' comments:
  //   <district> <grapheme> <ipa>
  //   * <grapheme>              (shared identity grapheme)
  static RuleSet parse(std::string_view text);
  static RuleSet load(const std::filesystem::path& path);

  // Two districts over ten graphemes, three of them ambiguous.
  static RuleSet two_district_default();

 private:
  const DistrictRules& rules_for(std::string_view district) const;

  std::vector<DistrictRules> districts_;
  std::vector<std::string> identity_;
};

struct SyntheticConfig {
  std::vector<std::string> districts;  // empty means every district in the rule set
  std::size_t per_district = 2000;
  std::size_t min_graphemes = 2;
  std::size_t max_graphemes = 8;
  std::uint64_t seed = 0;
  // Resample until every word contains an ambiguous grapheme.
  bool require_ambiguous = false;
  std::int64_t first_index = 0;
};

struct SyntheticCorpus {
  std::vector<Example> examples;
  // Best word accuracy any district-blind predictor can reach on these words,
  // in [0, 1], with districts drawn uniformly and independently of the word.
  double ambiguity_floor = 1.0;

  // The matching lower bound on word error rate, in percent.
  double floor_wer() const { return (1.0 - ambiguity_floor) * 100.0; }
};

// Districts are interleaved row by row; every word is drawn independently of
// its district. Throws ContractError for a district without rules.
SyntheticCorpus generate_synthetic_corpus(const RuleSet& rules, const SyntheticConfig& config);

// Mean over `words` of max_t |{d : apply(w, d) == t}| / |districts|: the
// accuracy of the Bayes-optimal predictor that never sees the district.
double district_blind_accuracy(const RuleSet& rules, const std::vector<std::string>& districts,
                               const std::vector<std::string>& words);

}  // namespace dgt

#endif  // DGT_SYNTHETIC_H_
