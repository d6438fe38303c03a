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

#include "dgt/decoding.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "gtest/gtest.h"

#include "dgt/error.h"

namespace dgt {
namespace {

using Ids = std::vector<TokenId>;

// Scorer driven by a function of the prefix; counts its calls.
class StubScorer : public StepScorer {
 public:
  explicit StubScorer(std::function<std::vector<float>(std::span<const TokenId>)> fn) : fn_(std::move(fn)) {}
  std::vector<float> next_logits(std::span<const TokenId> prefix) override {
    ++calls_;
    EXPECT_EQ(prefix.front(), Vocabulary::kPadId);
    return fn_(prefix);
  }
  std::size_t calls() const { return calls_; }

 private:
  std::function<std::vector<float>(std::span<const TokenId>)> fn_;
  std::size_t calls_ = 0;
};

std::vector<float> peaked(TokenId id, std::size_t vocab = 259) {
  std::vector<float> logits(vocab, 0.0f);
  logits[static_cast<std::size_t>(id)] = 10.0f;
  return logits;
}

// Logits whose softmax equals the given probabilities over five ids.
std::vector<float> probs(std::map<TokenId, double> p) {
  std::vector<float> logits(5, std::log(1e-9f));
  for (const auto& [id, prob] : p) logits[static_cast<std::size_t>(id)] = static_cast<float>(std::log(prob));
  return logits;
}

TEST(GreedySearchTest, ImmediateEos) {
  StubScorer scorer([](auto) { return peaked(Vocabulary::kEosId); });
  const auto result = greedy_search(scorer, 1024);
  EXPECT_TRUE(result.finished);
  EXPECT_EQ(result.ids, (Ids{Vocabulary::kEosId}));
  Vocabulary vocab;
  EXPECT_EQ(decode(vocab, result.ids), "");
}

TEST(GreedySearchTest, CapStopsNeverEndingScorer) {
  StubScorer scorer([](auto) { return peaked(byte_to_id('a')); });
  const auto result = greedy_search(scorer, 3);
  EXPECT_FALSE(result.finished);
  EXPECT_EQ(result.ids.size(), 3u);
  EXPECT_EQ(scorer.calls(), 3u);
}

TEST(GreedySearchTest, TiesBreakTowardLowestId) {
  StubScorer scorer([](std::span<const TokenId> prefix) {
    if (prefix.size() > 1) return peaked(Vocabulary::kEosId);
    std::vector<float> logits(259, 0.0f);
    logits[70] = 5.0f;
    logits[40] = 5.0f;
    logits[90] = 5.0f;
    return logits;
  });
  EXPECT_EQ(greedy_search(scorer, 10).ids, (Ids{40, Vocabulary::kEosId}));
}

TEST(GreedySearchTest, PrefixGrowsWithEmittedIds) {
  StubScorer scorer([](std::span<const TokenId> prefix) {
    if (prefix.size() == 1) return peaked(byte_to_id('h'));
    if (prefix.size() == 2) {
      EXPECT_EQ(prefix[1], byte_to_id('h'));
      return peaked(byte_to_id('i'));
    }
    return peaked(Vocabulary::kEosId);
  });
  Vocabulary vocab;
  EXPECT_EQ(decode(vocab, greedy_search(scorer, 10).ids), "hi");
}

// Greedy commits to 3 (p=0.5) and ends with total probability 0.175; the
// best sequence starts with 4 (p=0.4) and ends at once (total 0.36).
std::vector<float> trap(std::span<const TokenId> prefix) {
  if (prefix.size() == 1) return probs({{1, 0.1}, {3, 0.5}, {4, 0.4}});
  if (prefix.size() == 2 && prefix[1] == 3) return probs({{1, 0.3}, {3, 0.35}, {4, 0.35}});
  if (prefix.size() == 2 && prefix[1] == 4) return probs({{1, 0.9}, {3, 0.05}, {4, 0.05}});
  return probs({{1, 1.0}});
}

TEST(BeamSearchTest, FindsHigherScoringSequence) {
  StubScorer greedy_scorer(trap);
  EXPECT_EQ(greedy_search(greedy_scorer, 10).ids, (Ids{3, 3, 1}));
  StubScorer beam_scorer(trap);
  const auto result = beam_search(beam_scorer, 10, 2);
  EXPECT_TRUE(result.finished);
  EXPECT_EQ(result.ids, (Ids{4, 1}));
}

TEST(BeamSearchTest, WidthOneIsGreedyAndCapHolds) {
  StubScorer a(trap), b(trap);
  EXPECT_EQ(beam_search(a, 10, 1).ids, greedy_search(b, 10).ids);
  StubScorer endless([](auto) { return peaked(byte_to_id('z')); });
  const auto capped = beam_search(endless, 4, 3);
  EXPECT_FALSE(capped.finished);
  EXPECT_EQ(capped.ids.size(), 4u);
}

TEST(DecodeConfigTest, Validation) {
  DecodeConfig config;
  EXPECT_EQ(config.max_gen_len, 1024u);
  EXPECT_EQ(config.beam_width, 1u);
  EXPECT_NO_THROW(config.validate());
  config.max_gen_len = 0;
  EXPECT_THROW(config.validate(), ContractError);
}

class ModelDecodeTest : public ::testing::Test {
 protected:
  ModelDecodeTest() : model_(make_config(), 21) {
    std::vector<std::string> labels = {"d1", "d2"};
    vocab_.register_districts(labels);
    model_.resize_embeddings(vocab_.size());
  }
  static ModelConfig make_config() {
    ModelConfig config;
    config.set_d_model(16);
    config.n_heads = 2;
    config.set_decoder_layers(1);
    config.max_positions = 32;
    return config;
  }
  Model model_;
  Vocabulary vocab_;
};

TEST_F(ModelDecodeTest, EmissionCap) {
  DecodeConfig config;
  config.max_gen_len = 3;
  EXPECT_EQ(emission_limit(model_, config), 3u);
  config.max_gen_len = 1024;
  // The decoder cannot see past its positional capacity.
  EXPECT_EQ(emission_limit(model_, config), 32u);
  ModelScorer scorer(model_, encode(vocab_, "abc", "d1"));
  EXPECT_LE(greedy_search(scorer, 3).ids.size(), 3u);
}

TEST_F(ModelDecodeTest, EmptyTextGivesEmptyOutput) {
  EXPECT_EQ(greedy_decode(model_, vocab_, "", "d1", DecodeConfig{}), "");
}

TEST_F(ModelDecodeTest, OutputHasNoSpecialSurfaceForms) {
  DecodeConfig config;
  config.max_gen_len = 12;
  for (const char* text : {"ka", "sobi", "mtk"}) {
    const std::string out = greedy_decode(model_, vocab_, text, "d2", config);
    EXPECT_EQ(out.find("<d1>"), std::string::npos);
    EXPECT_EQ(out.find("<d2>"), std::string::npos);
  }
}

TEST_F(ModelDecodeTest, BatchMatchesSingleAndPermutes) {
  DecodeConfig config;
  config.max_gen_len = 10;
  std::vector<DecodeRequest> rows = {{"ka", "d1"}, {"ka", "d2"}, {"bimo", std::nullopt}, {"t", "d1"}, {"no", "d2"}};
  std::vector<std::string> singles;
  for (const auto& r : rows) singles.push_back(greedy_decode(model_, vocab_, r.text, r.district, config));

  const auto batch = batch_decode(model_, vocab_, rows, config, 1);
  ASSERT_EQ(batch.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(*batch[i].ipa, singles[i]);

  const auto threaded = batch_decode(model_, vocab_, rows, config, 3);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(*threaded[i].ipa, singles[i]);

  std::vector<std::size_t> perm = {3, 0, 4, 2, 1};
  std::vector<DecodeRequest> permuted;
  for (std::size_t p : perm) permuted.push_back(rows[p]);
  const auto out = batch_decode(model_, vocab_, permuted, config, 2);
  for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_EQ(*out[i].ipa, singles[perm[i]]);

  std::vector<DecodeRequest> one = {rows[1]};
  EXPECT_EQ(*batch_decode(model_, vocab_, one, config)[0].ipa, singles[1]);
}

TEST_F(ModelDecodeTest, FailingRowDoesNotStopBatch) {
  DecodeConfig config;
  config.max_gen_len = 5;
  std::vector<DecodeRequest> rows = {{"ka", "d1"}, {"ka", "x"}, {"ka", "d2"}};
  const auto out = batch_decode(model_, vocab_, rows, config, 2);
  EXPECT_TRUE(out[0].ok());
  EXPECT_FALSE(out[1].ok());
  EXPECT_NE(out[1].error.find("x"), std::string::npos);
  EXPECT_TRUE(out[2].ok());
}

TEST_F(ModelDecodeTest, DeterministicAcrossRuns) {
  DecodeConfig config;
  config.max_gen_len = 16;
  config.beam_width = 3;
  const auto a = transcribe(model_, vocab_, "kosa", "d1", config);
  const auto b = transcribe(model_, vocab_, "kosa", "d1", config);
  EXPECT_EQ(a, b);
}

}  // namespace
}  // namespace dgt
