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

#include <map>
#include <set>

#include "gtest/gtest.h"

#include "dgt/error.h"
#include "dgt/utf8.h"

namespace dgt {
namespace {

RuleSet ka_rules() { return RuleSet::parse("d1 k kʰ\nd2 k x\n* a\n"); }

TEST(RuleSetTest, KaExample) {
  const RuleSet rules = ka_rules();
  EXPECT_EQ(rules.apply("ka", "d1"), "kʰa");
  EXPECT_EQ(rules.apply("ka", "d2"), "xa");
  EXPECT_EQ(rules.ambiguous_graphemes(), (std::vector<std::string>{"k"}));
  EXPECT_EQ(rules.alphabet(), (std::vector<std::string>{"a", "k"}));
}

TEST(RuleSetTest, LeftmostLongestSinglePass) {
  const RuleSet rules = RuleSet::parse("# comment\nd1 k c\nd1 kh X\nd1 c k\n* h\n");
  // "kh" beats "k"; the output of one rewrite is never rewritten again.
  EXPECT_EQ(rules.apply("khk", "d1"), "Xc");
  EXPECT_EQ(rules.apply("ck", "d1"), "kc");
  EXPECT_EQ(rules.apply("hz", "d1"), "hz");
}

TEST(RuleSetTest, ParseErrors) {
  EXPECT_THROW(RuleSet::parse("d1 k\n"), ParseError);
  EXPECT_THROW(RuleSet::parse("d1 k x extra\n"), ParseError);
}

TEST(RuleSetTest, DefaultRules) {
  const RuleSet rules = RuleSet::two_district_default();
  EXPECT_EQ(rules.district_labels(), (std::vector<std::string>{"d1", "d2"}));
  EXPECT_EQ(rules.alphabet().size(), 10u);
  EXPECT_EQ(rules.ambiguous_graphemes().size(), 3u);
  EXPECT_EQ(rules.apply("ka", "d1"), "kʰa");
  EXPECT_EQ(rules.apply("ka", "d2"), "xa");
}

TEST(SyntheticTest, DeterministicAndWellFormed) {
  const RuleSet rules = RuleSet::two_district_default();
  SyntheticConfig config;
  config.per_district = 300;
  config.seed = 42;
  config.first_index = 100;
  const auto a = generate_synthetic_corpus(rules, config);
  const auto b = generate_synthetic_corpus(rules, config);
  ASSERT_EQ(a.examples.size(), 600u);
  for (std::size_t i = 0; i < a.examples.size(); ++i) {
    const Example& ex = a.examples[i];
    EXPECT_EQ(ex.index, static_cast<std::int64_t>(100 + i));
    EXPECT_EQ(ex.district, i % 2 == 0 ? "d1" : "d2");
    EXPECT_EQ(*ex.ipa, rules.apply(ex.contents, ex.district));
    const auto n = utf8::codepoint_count(ex.contents);
    EXPECT_GE(n, 2u);
    EXPECT_LE(n, 8u);
    EXPECT_EQ(ex.contents, b.examples[i].contents);
    EXPECT_EQ(ex.ipa, b.examples[i].ipa);
  }
  EXPECT_EQ(a.ambiguity_floor, b.ambiguity_floor);
  config.seed = 43;
  const auto c = generate_synthetic_corpus(rules, config);
  std::size_t same = 0;
  for (std::size_t i = 0; i < 600; ++i) same += c.examples[i].contents == a.examples[i].contents;
  EXPECT_LT(same, 100u);
}

TEST(SyntheticTest, UnambiguousRulesHaveFullFloor) {
  const RuleSet rules = RuleSet::parse("d1 k k\nd2 k k\n* a\n");
  SyntheticConfig config;
  config.per_district = 50;
  const auto corpus = generate_synthetic_corpus(rules, config);
  EXPECT_DOUBLE_EQ(corpus.ambiguity_floor, 1.0);
  EXPECT_DOUBLE_EQ(corpus.floor_wer(), 0.0);
}

TEST(SyntheticTest, EveryWordAmbiguousGivesHalfFloor) {
  const RuleSet rules = RuleSet::two_district_default();
  SyntheticConfig config;
  config.per_district = 400;
  config.require_ambiguous = true;
  const auto corpus = generate_synthetic_corpus(rules, config);
  EXPECT_LE(corpus.ambiguity_floor, 0.5);
  EXPECT_GE(corpus.floor_wer(), 50.0);
  for (const auto& ex : corpus.examples) {
    EXPECT_NE(rules.apply(ex.contents, "d1"), rules.apply(ex.contents, "d2")) << ex.contents;
  }
}

TEST(SyntheticTest, UnknownDistrictRejected) {
  SyntheticConfig config;
  config.districts = {"d1", "d9"};
  EXPECT_THROW(generate_synthetic_corpus(RuleSet::two_district_default(), config), ContractError);
}

// Exhaustive search over every district-blind predictor (one output per
// distinct word, drawn from the outputs some district would produce) on a
// tiny corpus; its best expected accuracy must equal the reported floor.
TEST(SyntheticTest, FloorEqualsBestBlindPredictor) {
  const RuleSet rules = RuleSet::parse("a k kʰ\nb k x\nc k k\na s s\nb s ʃ\nc s ʃ\n* o\n");
  const std::vector<std::string> districts = {"a", "b", "c"};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SyntheticConfig config;
    config.per_district = 2;
    config.min_graphemes = 1;
    config.max_graphemes = 3;
    config.seed = seed;
    const auto corpus = generate_synthetic_corpus(rules, config);

    std::vector<std::string> words;
    for (const auto& ex : corpus.examples) words.push_back(ex.contents);
    std::map<std::string, std::size_t> multiplicity;
    for (const auto& w : words) ++multiplicity[w];
    std::vector<std::string> distinct;
    std::vector<std::vector<std::string>> candidates;
    for (const auto& [w, n] : multiplicity) {
      distinct.push_back(w);
      std::set<std::string> outs;
      for (const auto& d : districts) outs.insert(rules.apply(w, d));
      candidates.emplace_back(outs.begin(), outs.end());
    }
    double best = 0.0;
    std::vector<std::size_t> choice(distinct.size(), 0);
    while (true) {
      double expected_correct = 0.0;
      for (std::size_t i = 0; i < distinct.size(); ++i) {
        std::size_t hits = 0;
        for (const auto& d : districts) hits += rules.apply(distinct[i], d) == candidates[i][choice[i]];
        expected_correct += static_cast<double>(multiplicity[distinct[i]]) * hits / districts.size();
      }
      best = std::max(best, expected_correct / words.size());
      std::size_t k = 0;
      while (k < choice.size() && ++choice[k] == candidates[k].size()) choice[k++] = 0;
      if (k == choice.size()) break;
    }
    EXPECT_NEAR(corpus.ambiguity_floor, best, 1e-12) << "seed " << seed;
    EXPECT_NEAR(district_blind_accuracy(rules, districts, words), best, 1e-12);
  }
}

}  // namespace
}  // namespace dgt
