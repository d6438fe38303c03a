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

#include "dgt/tensor.h"

#include <cmath>
#include <random>

#include "gtest/gtest.h"

#include "dgt/error.h"
#include "oracles.h"

namespace dgt {
namespace {

using testing::gradient_check;
using testing::random_tensor;
using testing::weighted_sum;

constexpr double kGradTolerance = 1e-4;

TEST(TensorTest, MatmulIdentity) {
  auto eye = TensorF::from_data({2, 2}, {1, 0, 0, 1});
  auto b = TensorF::from_data({2, 2}, {1, 2, 3, 4});
  auto c = matmul(eye, b);
  EXPECT_EQ(c.shape(), (Shape{2, 2}));
  EXPECT_EQ(std::vector<float>(c.data().begin(), c.data().end()), (std::vector<float>{1, 2, 3, 4}));
}

TEST(TensorTest, MatmulRowByColumn) {
  auto c = matmul(TensorF::from_data({1, 2}, {1, 2}), TensorF::from_data({2, 1}, {3, 4}));
  EXPECT_EQ(c.shape(), (Shape{1, 1}));
  EXPECT_FLOAT_EQ(c.item(), 11.0f);
}

TEST(TensorTest, MatmulShapeErrorNamesBothShapes) {
  try {
    matmul(TensorF::zeros({2, 3}), TensorF::zeros({2, 3}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("[2x3]"), std::string::npos) << what;
    EXPECT_NE(what.find("and"), std::string::npos) << what;
  }
}

TEST(TensorTest, FromDataRejectsWrongLength) {
  EXPECT_THROW(TensorF::from_data({2, 2}, {1, 2, 3}), DimensionError);
}

TEST(TensorTest, MatmulMatchesNaiveProduct) {
  std::mt19937_64 rng(7);
  auto a = random_tensor({5, 17}, rng);
  auto b = random_tensor({17, 3}, rng);
  auto c = matmul(a, b);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double expected = 0.0;
      for (std::size_t k = 0; k < 17; ++k) expected += a.at(i, k) * b.at(k, j);
      EXPECT_NEAR(c.at(i, j), expected, 1e-12);
    }
  }
}

TEST(TensorTest, SoftmaxUniform) {
  auto y = softmax(TensorF::from_data({1, 4}, {0, 0, 0, 0}), 1);
  for (float v : y.data()) EXPECT_FLOAT_EQ(v, 0.25f);
}

TEST(TensorTest, SoftmaxLargeInputsStayFinite) {
  auto y = softmax(TensorF::from_data({1, 2}, {1000, 0}), 1);
  EXPECT_TRUE(y.all_finite());
  EXPECT_FLOAT_EQ(y.at(0), 1.0f);
  EXPECT_NEAR(y.at(1), 0.0f, 1e-30);
}

TEST(TensorTest, SoftmaxRowsSumToOne) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = random_tensor({6, 9}, rng, -50.0, 50.0);
    auto y = softmax(x, 1);
    for (std::size_t r = 0; r < 6; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 9; ++c) {
        EXPECT_GE(y.at(r, c), 0.0);
        total += y.at(r, c);
      }
      EXPECT_NEAR(total, 1.0, 1e-6);
    }
    auto z = softmax(x, 0);
    for (std::size_t c = 0; c < 9; ++c) {
      double total = 0.0;
      for (std::size_t r = 0; r < 6; ++r) total += z.at(r, c);
      EXPECT_NEAR(total, 1.0, 1e-6);
    }
  }
}

TEST(TensorTest, SoftmaxRejectsBadAxis) {
  EXPECT_THROW(softmax(TensorF::zeros({2, 2}), 2), DimensionError);
}

TEST(TensorTest, LayerNormConstantRowIsZero) {
  auto y = layer_norm(TensorF::full({1, 5}, 3.0f), TensorF::full({5}, 1.0f), TensorF::zeros({5}), 1e-5f);
  for (float v : y.data()) EXPECT_EQ(v, 0.0f);
}

TEST(TensorTest, LayerNormSymmetricPair) {
  auto y = layer_norm(TensorD::from_data({1, 2}, {1, 3}), TensorD::full({2}, 1.0), TensorD::zeros({2}), 1e-12);
  EXPECT_NEAR(y.at(0), -1.0, 1e-9);
  EXPECT_NEAR(y.at(1), 1.0, 1e-9);
}

TEST(TensorTest, LayerNormRejectsNonPositiveEps) {
  EXPECT_THROW(layer_norm(TensorF::zeros({1, 2}), TensorF::zeros({2}), TensorF::zeros({2}), 0.0f), ContractError);
}

TEST(TensorTest, CrossEntropyUniformLogits) {
  std::vector<TokenId> targets = {5, 17, 258};
  auto loss = cross_entropy(TensorD::zeros({3, 259}), targets, -1);
  EXPECT_NEAR(loss.item(), std::log(259.0), 1e-12);
  EXPECT_NEAR(loss.item(), 5.5568, 1e-4);
}

TEST(TensorTest, CrossEntropyVanishesWithMargin) {
  std::vector<TokenId> targets = {2};
  double previous = 1e9;
  for (double margin : {1.0, 5.0, 10.0, 20.0, 40.0}) {
    std::vector<double> logits(4, 0.0);
    logits[2] = margin;
    const double loss = cross_entropy(TensorD::from_data({1, 4}, logits), targets, -1).item();
    EXPECT_LT(loss, previous);
    previous = loss;
  }
  EXPECT_LT(previous, 1e-15);
}

TEST(TensorTest, CrossEntropyIgnoresPositions) {
  std::mt19937_64 rng(11);
  auto logits = random_tensor({3, 6}, rng);
  std::vector<TokenId> all = {1, 4, 0};
  std::vector<TokenId> first = {1, 0, 0};
  auto first_only = cross_entropy(logits, first, 0);
  std::vector<TokenId> one = {1};
  auto row0 = cross_entropy(TensorD::from_data({1, 6}, {logits.data()[0], logits.data()[1], logits.data()[2],
                                                        logits.data()[3], logits.data()[4], logits.data()[5]}),
                            one, 0);
  EXPECT_NEAR(first_only.item(), row0.item(), 1e-12);
  EXPECT_NO_THROW(cross_entropy(logits, all, 0));
}

TEST(TensorTest, CrossEntropyErrors) {
  std::vector<TokenId> ignored = {0, 0};
  EXPECT_THROW(cross_entropy(TensorF::zeros({2, 4}), ignored, 0), ContractError);
  std::vector<TokenId> out_of_range = {4, 1};
  EXPECT_THROW(cross_entropy(TensorF::zeros({2, 4}), out_of_range, 0), UnknownIdError);
  std::vector<TokenId> short_targets = {1};
  EXPECT_THROW(cross_entropy(TensorF::zeros({2, 4}), short_targets, 0), DimensionError);
}

TEST(TensorTest, EmbeddingRejectsUnknownId) {
  std::vector<TokenId> ids = {0, 3};
  EXPECT_THROW(embedding(TensorF::zeros({3, 2}), ids), UnknownIdError);
}

TEST(TensorTest, BackwardRequiresScalar) {
  auto x = TensorF::zeros({2, 2}, true);
  EXPECT_THROW(scale(x, 2.0f).backward(), ContractError);
}

TEST(TensorTest, BackwardAccumulatesOnRepeat) {
  auto x = TensorD::from_data({1, 3}, {1, 2, 3}, true);
  auto loss = sum(scale(x, 2.0));
  loss.backward();
  loss.backward();
  for (double g : x.grad()) EXPECT_DOUBLE_EQ(g, 4.0);
  x.zero_grad();
  loss.backward();
  for (double g : x.grad()) EXPECT_DOUBLE_EQ(g, 2.0);
}

TEST(TensorTest, BackwardIsLinearOverIndependentSubgraphs) {
  std::mt19937_64 rng(5);
  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({4, 2}, rng);
  auto c = random_tensor({3, 5}, rng);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  c.set_requires_grad(true);
  auto f1 = [&] { return weighted_sum(matmul(a, b), 1); };
  auto f2 = [&] { return sum(softmax(c, 1)) ; };
  auto f3 = [&] { return weighted_sum(gelu(c), 2); };

  add(f1(), add(f2(), f3())).backward();
  std::vector<double> ga(a.grad().begin(), a.grad().end());
  std::vector<double> gc(c.grad().begin(), c.grad().end());
  a.zero_grad();
  b.zero_grad();
  c.zero_grad();
  f1().backward();
  f2().backward();
  f3().backward();
  for (std::size_t i = 0; i < ga.size(); ++i) EXPECT_NEAR(ga[i], a.grad()[i], 1e-14);
  for (std::size_t i = 0; i < gc.size(); ++i) EXPECT_NEAR(gc[i], c.grad()[i], 1e-14);
}

TEST(TensorTest, NoGradGuardSkipsRecording) {
  auto x = TensorF::zeros({1, 2}, true);
  NoGradGuard guard;
  auto y = scale(x, 3.0f);
  EXPECT_FALSE(y.requires_grad());
}

TEST(TensorTest, AttentionFullyMaskedRowIsZero) {
  std::mt19937_64 rng(9);
  auto q = random_tensor({2, 4}, rng);
  auto kv = random_tensor({3, 4}, rng);
  AttentionMask mask = AttentionMask::full(2, 3);
  for (std::size_t j = 0; j < 3; ++j) mask.allowed[3 + j] = 0;
  auto out = attention(q, kv, kv, 2, &mask);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(out.at(1, c), 0.0);
  EXPECT_TRUE(out.all_finite());
  auto weights = attention_weights(q, kv, 2, &mask);
  for (double w : weights) EXPECT_TRUE(std::isfinite(w));
}

TEST(TensorTest, AttentionWeightsSumToOne) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    auto q = random_tensor({5, 8}, rng, -3, 3);
    auto k = random_tensor({5, 8}, rng, -3, 3);
    auto mask = AttentionMask::causal(5);
    auto weights = attention_weights(q, k, 2, &mask);
    ASSERT_EQ(weights.size(), 2u * 5 * 5);
    for (std::size_t h = 0; h < 2; ++h) {
      for (std::size_t i = 0; i < 5; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < 5; ++j) {
          const double w = weights[(h * 5 + i) * 5 + j];
          if (j > i) EXPECT_EQ(w, 0.0);
          total += w;
        }
        EXPECT_NEAR(total, 1.0, 1e-6);
      }
    }
  }
}

TEST(TensorTest, AttentionMaskShapeMismatch) {
  auto x = TensorF::zeros({3, 4});
  auto mask = AttentionMask::full(2, 3);
  EXPECT_THROW(attention(x, x, x, 2, &mask), DimensionError);
  EXPECT_THROW(attention(x, x, x, 3, nullptr), DimensionError);
}

TEST(TensorTest, BlockDiagonalMask) {
  std::vector<std::size_t> q = {2, 1};
  std::vector<std::size_t> k = {2, 1};
  auto mask = AttentionMask::block_diagonal(q, k, true);
  EXPECT_TRUE(mask.at(0, 0));
  EXPECT_FALSE(mask.at(0, 1));
  EXPECT_TRUE(mask.at(1, 0));
  EXPECT_TRUE(mask.at(1, 1));
  EXPECT_FALSE(mask.at(1, 2));
  EXPECT_FALSE(mask.at(2, 0));
  EXPECT_TRUE(mask.at(2, 2));
}

TEST(TensorTest, DropoutScalesSurvivors) {
  std::mt19937_64 rng(1);
  auto x = TensorF::full({1, 1000}, 1.0f);
  auto y = dropout(x, 0.25f, rng);
  std::size_t kept = 0;
  for (float v : y.data()) {
    if (v != 0.0f) {
      EXPECT_FLOAT_EQ(v, 1.0f / 0.75f);
      ++kept;
    }
  }
  EXPECT_GT(kept, 650u);
  EXPECT_LT(kept, 850u);
}

// Finite-difference checks of every differentiable primitive, 64-bit, h=1e-5.
class GradientTest : public ::testing::TestWithParam<int> {
 protected:
  std::mt19937_64 rng_{static_cast<std::uint64_t>(GetParam()) * 7919 + 1};
};

TEST_P(GradientTest, Matmul) {
  auto a = random_tensor({3, 4}, rng_);
  auto b = random_tensor({4, 5}, rng_);
  EXPECT_LT(gradient_check([](const auto& in) { return weighted_sum(matmul(in[0], in[1]), 1); }, {a, b}),
            kGradTolerance);
  EXPECT_LT(gradient_check([](const auto& in) { return sum(matmul(in[0], in[1])); }, {a, b}), kGradTolerance);
}

TEST_P(GradientTest, TransposeAddMulScale) {
  auto a = random_tensor({3, 4}, rng_);
  auto b = random_tensor({4, 3}, rng_);
  auto f = [](const std::vector<TensorD>& in) {
    auto t = transpose(in[1]);
    return weighted_sum(scale(mul(add(in[0], t), t), 0.7), 2);
  };
  EXPECT_LT(gradient_check(f, {a, b}), kGradTolerance);
}

TEST_P(GradientTest, AddBias) {
  auto x = random_tensor({4, 3}, rng_);
  auto b = random_tensor({3}, rng_);
  EXPECT_LT(gradient_check([](const auto& in) { return weighted_sum(add_bias(in[0], in[1]), 3); }, {x, b}),
            kGradTolerance);
}

TEST_P(GradientTest, Relu) {
  // Keep inputs away from the kink at zero.
  auto x = random_tensor({4, 5}, rng_, 0.1, 1.0);
  auto data = x.mutable_data();
  for (std::size_t i = 0; i < data.size(); i += 2) data[i] = -data[i];
  EXPECT_LT(gradient_check([](const auto& in) { return weighted_sum(relu(in[0]), 4); }, {x}), kGradTolerance);
}

TEST_P(GradientTest, Gelu) {
  auto x = random_tensor({4, 5}, rng_, -3, 3);
  EXPECT_LT(gradient_check([](const auto& in) { return weighted_sum(gelu(in[0]), 5); }, {x}), kGradTolerance);
}

TEST_P(GradientTest, SoftmaxBothAxes) {
  auto x = random_tensor({4, 6}, rng_, -2, 2);
  EXPECT_LT(gradient_check([](const auto& in) { return weighted_sum(softmax(in[0], 1), 6); }, {x}),
            kGradTolerance);
  EXPECT_LT(gradient_check([](const auto& in) { return weighted_sum(softmax(in[0], 0), 7); }, {x}),
            kGradTolerance);
}

TEST_P(GradientTest, LayerNorm) {
  auto x = random_tensor({3, 6}, rng_, -2, 2);
  auto g = random_tensor({6}, rng_, 0.5, 1.5);
  auto b = random_tensor({6}, rng_);
  auto f = [](const std::vector<TensorD>& in) { return weighted_sum(layer_norm(in[0], in[1], in[2], 1e-5), 8); };
  EXPECT_LT(gradient_check(f, {x, g, b}), kGradTolerance);
}

TEST_P(GradientTest, Embedding) {
  auto table = random_tensor({7, 4}, rng_);
  std::vector<TokenId> ids = {3, 0, 3, 6, 1};
  auto f = [&](const std::vector<TensorD>& in) { return weighted_sum(embedding(in[0], ids), 9); };
  EXPECT_LT(gradient_check(f, {table}), kGradTolerance);
}

TEST_P(GradientTest, CrossEntropy) {
  auto logits = random_tensor({5, 7}, rng_, -2, 2);
  std::vector<TokenId> targets = {3, 0, 6, 0, 2};
  auto f = [&](const std::vector<TensorD>& in) { return cross_entropy(in[0], targets, 0); };
  EXPECT_LT(gradient_check(f, {logits}), kGradTolerance);
}

TEST_P(GradientTest, SumAndMean) {
  auto x = random_tensor({3, 3}, rng_);
  EXPECT_LT(gradient_check([](const auto& in) { return mean(mul(in[0], in[0])); }, {x}), kGradTolerance);
  EXPECT_LT(gradient_check([](const auto& in) { return sum(mul(in[0], in[0])); }, {x}), kGradTolerance);
}

TEST_P(GradientTest, Dropout) {
  auto x = random_tensor({4, 6}, rng_);
  const std::uint64_t seed = rng_();
  auto f = [seed](const std::vector<TensorD>& in) {
    std::mt19937_64 mask_rng(seed);
    return weighted_sum(dropout(in[0], 0.3, mask_rng), 10);
  };
  EXPECT_LT(gradient_check(f, {x}), kGradTolerance);
}

TEST_P(GradientTest, MaskedAttention) {
  auto q = random_tensor({4, 6}, rng_);
  auto k = random_tensor({3, 6}, rng_);
  auto v = random_tensor({3, 6}, rng_);
  std::vector<std::size_t> ql = {2, 2};
  std::vector<std::size_t> kl = {1, 2};
  auto mask = AttentionMask::block_diagonal(ql, kl, false);
  auto f = [&](const std::vector<TensorD>& in) { return weighted_sum(attention(in[0], in[1], in[2], 3, &mask), 11); };
  EXPECT_LT(gradient_check(f, {q, k, v}), kGradTolerance);
  auto causal = AttentionMask::causal(3);
  auto g = [&](const std::vector<TensorD>& in) {
    return weighted_sum(attention(in[0], in[1], in[2], 2, &causal), 12);
  };
  EXPECT_LT(gradient_check(g, {k, v, random_tensor({3, 6}, rng_)}), kGradTolerance);
}

INSTANTIATE_TEST_SUITE_P(Seeds, GradientTest, ::testing::Range(0, 10));

}  // namespace
}  // namespace dgt
