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

#include "dgt/synthetic.h"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "dgt/error.h"
#include "dgt/utf8.h"

namespace dgt {

RuleSet::RuleSet(std::vector<DistrictRules> districts, std::vector<std::string> identity)
    : districts_(std::move(districts)), identity_(std::move(identity)) {
  std::set<std::string> labels;
  for (const auto& d : districts_) {
    Vocabulary::validate_label(d.district);
    if (!labels.insert(d.district).second) throw ValidationError("district '" + d.district + "' listed twice");
    for (const auto& r : d.rules) {
      if (r.grapheme.empty()) throw ValidationError("empty grapheme in rules for '" + d.district + "'");
    }
  }
  for (const auto& g : identity_) {
    if (g.empty()) throw ValidationError("empty identity grapheme");
  }
}

std::vector<std::string> RuleSet::district_labels() const {
  std::vector<std::string> labels;
  for (const auto& d : districts_) labels.push_back(d.district);
  return labels;
}

bool RuleSet::has_district(std::string_view label) const {
  return std::any_of(districts_.begin(), districts_.end(),
                     [&](const DistrictRules& d) { return d.district == label && !d.rules.empty(); });
}

const DistrictRules& RuleSet::rules_for(std::string_view district) const {
  for (const auto& d : districts_) {
    if (d.district == district && !d.rules.empty()) return d;
  }
  throw ContractError("no rewrite rules for district '" + std::string(district) + "'");
}

std::vector<std::string> RuleSet::alphabet() const {
  std::set<std::string> graphemes(identity_.begin(), identity_.end());
  for (const auto& d : districts_) {
    for (const auto& r : d.rules) graphemes.insert(r.grapheme);
  }
  return {graphemes.begin(), graphemes.end()};
}

std::vector<std::string> RuleSet::ambiguous_graphemes() const {
  std::vector<std::string> out;
  for (const auto& g : alphabet()) {
    std::set<std::string> outputs;
    for (const auto& d : districts_) {
      if (!d.rules.empty()) outputs.insert(apply(g, d.district));
    }
    if (outputs.size() > 1) out.push_back(g);
  }
  return out;
}

std::string RuleSet::apply(std::string_view word, std::string_view district) const {
  const DistrictRules& rules = rules_for(district);
  std::string out;
  std::size_t pos = 0;
  while (pos < word.size()) {
    const std::string_view rest = word.substr(pos);
    std::size_t best_len = 0;
    const std::string* best_out = nullptr;
    for (const auto& r : rules.rules) {
      if (r.grapheme.size() > best_len && rest.starts_with(r.grapheme)) {
        best_len = r.grapheme.size();
        best_out = &r.ipa;
      }
    }
    for (const auto& g : identity_) {
      if (g.size() > best_len && rest.starts_with(g)) {
        best_len = g.size();
        best_out = &g;
      }
    }
    if (best_out != nullptr) {
      out += *best_out;
      pos += best_len;
      continue;
    }
    // Copy one codepoint through unchanged.
    std::size_t step = 1;
    while (pos + step < word.size() && (static_cast<unsigned char>(word[pos + step]) & 0xC0) == 0x80) ++step;
    out.append(word.substr(pos, step));
    pos += step;
  }
  return out;
}

RuleSet RuleSet::parse(std::string_view text) {
  std::vector<DistrictRules> districts;
  std::vector<std::string> identity;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<std::string> parts;
    for (std::string f; fields >> f;) parts.push_back(f);
    if (parts.empty()) continue;
    if (parts[0] == "*") {
      if (parts.size() != 2) throw ParseError("identity line needs exactly one grapheme", line_no, "line");
      identity.push_back(parts[1]);
      continue;
    }
    if (parts.size() != 3) throw ParseError("rule line needs <district> <grapheme> <ipa>", line_no, "line");
    auto it = std::find_if(districts.begin(), districts.end(),
                           [&](const DistrictRules& d) { return d.district == parts[0]; });
    if (it == districts.end()) {
      districts.push_back({parts[0], {}});
      it = districts.end() - 1;
    }
    it->rules.push_back({parts[1], parts[2]});
  }
  return RuleSet(std::move(districts), std::move(identity));
}

RuleSet RuleSet::load(const std::filesystem::path& path) { return parse(read_file(path)); }

RuleSet RuleSet::two_district_default() {
  return RuleSet(
      {
          {"d1", {{"k", "kʰ"}, {"s", "s"}, {"o", "o"}}},
          {"d2", {{"k", "x"}, {"s", "ʃ"}, {"o", "ɔ"}}},
      },
      {"a", "b", "d", "i", "m", "n", "t"});
}

double district_blind_accuracy(const RuleSet& rules, const std::vector<std::string>& districts,
                               const std::vector<std::string>& words) {
  if (districts.empty()) throw ContractError("district_blind_accuracy: no districts");
  if (words.empty()) return 1.0;
  double total = 0.0;
  std::map<std::string, double> cache;
  for (const auto& word : words) {
    auto it = cache.find(word);
    if (it == cache.end()) {
      std::map<std::string, std::size_t> votes;
      for (const auto& d : districts) ++votes[rules.apply(word, d)];
      std::size_t best = 0;
      for (const auto& [target, n] : votes) best = std::max(best, n);
      it = cache.emplace(word, static_cast<double>(best) / static_cast<double>(districts.size())).first;
    }
    total += it->second;
  }
  return total / static_cast<double>(words.size());
}

SyntheticCorpus generate_synthetic_corpus(const RuleSet& rules, const SyntheticConfig& config) {
  const std::vector<std::string> districts = config.districts.empty() ? rules.district_labels() : config.districts;
  if (districts.empty()) throw ContractError("generate_synthetic_corpus: no districts");
  for (const auto& d : districts) {
    if (!rules.has_district(d)) throw ContractError("no rewrite rules for district '" + d + "'");
  }
  if (config.per_district == 0) throw ContractError("generate_synthetic_corpus: per_district must be positive");
  if (config.min_graphemes == 0 || config.min_graphemes > config.max_graphemes) {
    throw ContractError("generate_synthetic_corpus: invalid word length range");
  }
  const auto alphabet = rules.alphabet();
  if (alphabet.empty()) throw ContractError("generate_synthetic_corpus: empty grapheme alphabet");
  const auto ambiguous_list = rules.ambiguous_graphemes();
  const std::set<std::string> ambiguous(ambiguous_list.begin(), ambiguous_list.end());
  if (config.require_ambiguous && ambiguous.empty()) {
    throw ContractError("generate_synthetic_corpus: require_ambiguous with no ambiguous grapheme");
  }

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> length_dist(config.min_graphemes, config.max_graphemes);
  std::uniform_int_distribution<std::size_t> grapheme_dist(0, alphabet.size() - 1);
  auto draw_word = [&] {
    while (true) {
      const std::size_t len = length_dist(rng);
      std::string word;
      bool has_ambiguous = false;
      for (std::size_t i = 0; i < len; ++i) {
        const auto& g = alphabet[grapheme_dist(rng)];
        has_ambiguous = has_ambiguous || ambiguous.count(g) > 0;
        word += g;
      }
      if (!config.require_ambiguous || has_ambiguous) return word;
    }
  };

  SyntheticCorpus corpus;
  std::vector<std::string> words;
  std::int64_t index = config.first_index;
  for (std::size_t i = 0; i < config.per_district; ++i) {
    for (const auto& d : districts) {
      Example ex;
      ex.index = index++;
      ex.district = d;
      ex.contents = draw_word();
      ex.ipa = rules.apply(ex.contents, d);
      words.push_back(ex.contents);
      corpus.examples.push_back(std::move(ex));
    }
  }
  corpus.ambiguity_floor = district_blind_accuracy(rules, districts, words);
  return corpus;
}

}  // namespace dgt
