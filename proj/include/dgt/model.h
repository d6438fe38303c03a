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

#ifndef DGT_MODEL_H_
#define DGT_MODEL_H_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dgt/tensor.h"
#include "dgt/tokenizer.h"

namespace dgt {

struct ModelConfig {
  std::size_t d_model = 128;
  std::size_t n_heads = 4;
  std::size_t decoder_layers = 2;
  std::size_t encoder_layers = 6;  // 3 x decoder_layers unless overridden
  std::size_t d_ff = 512;          // 4 x d_model
  double dropout = 0.1;
  std::size_t max_positions = 512;
  std::size_t vocab_size = Vocabulary::kBaseSize;
  std::size_t max_gen_len = 1024;
  double layer_norm_eps = 1e-5;

  // Sets the decoder depth and the derived encoder depth (3x).
  ModelConfig& set_decoder_layers(std::size_t layers);
  // Sets d_model and the derived feed-forward width (4x).
  ModelConfig& set_d_model(std::size_t width);

  // Throws ContractError on an inconsistent configuration.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

template <typename Real>
struct Linear {
  Tensor<Real> weight;  // [in x out]
  Tensor<Real> bias;    // [out]

  Tensor<Real> operator()(const Tensor<Real>& x) const { return add_bias(matmul(x, weight), bias); }
};

template <typename Real>
struct LayerNormParams {
  Tensor<Real> gain;
  Tensor<Real> bias;
};

template <typename Real>
struct AttentionParams {
  Linear<Real> query;
  Linear<Real> key;
  Linear<Real> value;
  Linear<Real> output;
};

template <typename Real>
struct FeedForwardParams {
  Linear<Real> expand;
  Linear<Real> contract;
};

template <typename Real>
struct EncoderLayerParams {
  LayerNormParams<Real> attn_norm;
  AttentionParams<Real> self_attn;
  LayerNormParams<Real> ffn_norm;
  FeedForwardParams<Real> ffn;
};

template <typename Real>
struct DecoderLayerParams {
  LayerNormParams<Real> self_norm;
  AttentionParams<Real> self_attn;
  LayerNormParams<Real> cross_norm;
  AttentionParams<Real> cross_attn;
  LayerNormParams<Real> ffn_norm;
  FeedForwardParams<Real> ffn;
};

// Multi-head attention with input and output projections. `queries` is
// [Tq x d], `keys_values` is [Tk x d]; the mask, when given, is [Tq x Tk].
template <typename Real>
Tensor<Real> multi_head_attention(const AttentionParams<Real>& params, const Tensor<Real>& queries,
                                  const Tensor<Real>& keys_values, std::size_t n_heads,
                                  const AttentionMask* mask);

struct RunMode {
  bool training = false;
  std::mt19937_64* rng = nullptr;  // required when training with dropout > 0
};

template <typename Real>
struct NamedTensor {
  std::string name;
  Tensor<Real> tensor;
};

template <typename Real>
struct EncoderOutput {
  Tensor<Real> memory;                      // packed [sum(lengths) x d_model]
  std::vector<std::size_t> lengths;         // per source sequence
};

// Pre-norm encoder-decoder transformer over byte-level ids. Batches are
// packed row-wise with block-diagonal attention masks instead of padding.
// The decoder input starts with the pad id as its start symbol.
template <typename Real>
class TranscriptionModel {
 public:
  TranscriptionModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

  // Teacher-forced logits [len(decoder_input) x vocab_size].
  Tensor<Real> forward(std::span<const TokenId> source, std::span<const TokenId> decoder_input,
                       const RunMode& mode = {}) const;
  // Packed logits for a batch, rows in batch order.
  Tensor<Real> forward_batch(std::span<const std::vector<TokenId>> sources,
                             std::span<const std::vector<TokenId>> decoder_inputs,
                             const RunMode& mode = {}) const;

  EncoderOutput<Real> encode(std::span<const std::vector<TokenId>> sources,
                             const RunMode& mode = {}) const;
  Tensor<Real> decode(const EncoderOutput<Real>& encoded,
                      std::span<const std::vector<TokenId>> decoder_inputs,
                      const RunMode& mode = {}) const;

  // Appends vocabulary rows. Existing embedding rows and output columns are
  // kept bit-exactly; new entries are drawn from N(0, 0.02^2) using a stream
  // derived from the model seed and the sizes involved.
  void resize_embeddings(std::size_t new_vocab_size);

  // Independent copy of every parameter.
  TranscriptionModel clone() const;

  // Stable, unique names in a fixed order. The returned handles share
  // storage with the model.
  std::vector<NamedTensor<Real>> parameters() const;
  std::size_t parameter_count() const;
  std::size_t encoder_parameter_count() const;
  std::size_t decoder_parameter_count() const;

  // Sinusoidal encodings of the first `count` positions, [count x d_model].
  std::vector<Real> positional_encoding(std::size_t count) const;

 private:
  Tensor<Real> embed(std::span<const std::vector<TokenId>> sequences, const RunMode& mode) const;

  ModelConfig config_;
  std::uint64_t seed_;
  Tensor<Real> token_embedding_;  // [vocab x d]
  std::vector<EncoderLayerParams<Real>> encoder_;
  LayerNormParams<Real> encoder_norm_;
  std::vector<DecoderLayerParams<Real>> decoder_;
  LayerNormParams<Real> decoder_norm_;
  Linear<Real> output_;  // [d x vocab]
  std::vector<Real> positions_;  // [max_positions x d]
};

using Model = TranscriptionModel<float>;

}  // namespace dgt

#endif  // DGT_MODEL_H_
