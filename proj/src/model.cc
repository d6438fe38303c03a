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

#include "dgt/model.h"

#include <algorithm>
#include <cmath>

#include "dgt/error.h"

namespace dgt {
namespace {

constexpr double kEmbeddingStd = 0.02;

template <typename Real>
Tensor<Real> normal_tensor(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<Real> data(shape_numel(shape));
  for (Real& v : data) v = static_cast<Real>(dist(rng));
  return Tensor<Real>::from_data(std::move(shape), std::move(data), true);
}

template <typename Real>
Linear<Real> make_linear(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<Real> w(in * out);
  for (Real& v : w) v = static_cast<Real>(dist(rng));
  return {Tensor<Real>::from_data({in, out}, std::move(w), true), Tensor<Real>::zeros({out}, true)};
}

template <typename Real>
LayerNormParams<Real> make_norm(std::size_t width) {
  return {Tensor<Real>::full({width}, Real(1), true), Tensor<Real>::zeros({width}, true)};
}

template <typename Real>
AttentionParams<Real> make_attention(std::size_t width, std::mt19937_64& rng) {
  AttentionParams<Real> p;
  p.query = make_linear<Real>(width, width, rng);
  p.key = make_linear<Real>(width, width, rng);
  p.value = make_linear<Real>(width, width, rng);
  p.output = make_linear<Real>(width, width, rng);
  return p;
}

template <typename Real>
FeedForwardParams<Real> make_ffn(std::size_t width, std::size_t hidden, std::mt19937_64& rng) {
  return {make_linear<Real>(width, hidden, rng), make_linear<Real>(hidden, width, rng)};
}

template <typename Real>
void add_linear(std::vector<NamedTensor<Real>>& out, const std::string& prefix, const Linear<Real>& l) {
  out.push_back({prefix + ".weight", l.weight});
  out.push_back({prefix + ".bias", l.bias});
}

template <typename Real>
void add_norm(std::vector<NamedTensor<Real>>& out, const std::string& prefix,
              const LayerNormParams<Real>& n) {
  out.push_back({prefix + ".gain", n.gain});
  out.push_back({prefix + ".bias", n.bias});
}

template <typename Real>
void add_attention(std::vector<NamedTensor<Real>>& out, const std::string& prefix,
                   const AttentionParams<Real>& a) {
  add_linear(out, prefix + ".query", a.query);
  add_linear(out, prefix + ".key", a.key);
  add_linear(out, prefix + ".value", a.value);
  add_linear(out, prefix + ".output", a.output);
}

template <typename Real>
void add_ffn(std::vector<NamedTensor<Real>>& out, const std::string& prefix,
             const FeedForwardParams<Real>& f) {
  add_linear(out, prefix + ".expand", f.expand);
  add_linear(out, prefix + ".contract", f.contract);
}

template <typename Real>
std::size_t count(const std::vector<NamedTensor<Real>>& params, const std::string& prefix) {
  std::size_t total = 0;
  for (const auto& p : params) {
    if (p.name.rfind(prefix, 0) == 0) total += p.tensor.numel();
  }
  return total;
}

template <typename Real>
Tensor<Real> maybe_dropout(const Tensor<Real>& x, const ModelConfig& config, const RunMode& mode) {
  if (!mode.training || config.dropout <= 0.0) return x;
  if (mode.rng == nullptr) throw ContractError("training mode with dropout requires an rng");
  return dropout(x, static_cast<Real>(config.dropout), *mode.rng);
}

template <typename Real>
Tensor<Real> norm(const Tensor<Real>& x, const LayerNormParams<Real>& p, const ModelConfig& config) {
  return layer_norm(x, p.gain, p.bias, static_cast<Real>(config.layer_norm_eps));
}

template <typename Real>
Tensor<Real> feed_forward(const FeedForwardParams<Real>& p, const Tensor<Real>& x) {
  return p.contract(gelu(p.expand(x)));
}

std::vector<std::size_t> lengths_of(std::span<const std::vector<TokenId>> sequences) {
  std::vector<std::size_t> lengths;
  lengths.reserve(sequences.size());
  for (const auto& s : sequences) lengths.push_back(s.size());
  return lengths;
}

}  // namespace

ModelConfig& ModelConfig::set_decoder_layers(std::size_t layers) {
  decoder_layers = layers;
  encoder_layers = 3 * layers;
  return *this;
}

ModelConfig& ModelConfig::set_d_model(std::size_t width) {
  d_model = width;
  d_ff = 4 * width;
  return *this;
}

void ModelConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
    throw ContractError("d_model (" + std::to_string(d_model) + ") must be a positive multiple of n_heads (" +
                        std::to_string(n_heads) + ")");
  }
  if (encoder_layers == 0 || decoder_layers == 0) throw ContractError("layer counts must be positive");
  if (d_ff == 0) throw ContractError("d_ff must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ContractError("dropout must lie in [0, 1)");
  if (max_positions == 0) throw ContractError("max_positions must be positive");
  if (vocab_size < Vocabulary::kBaseSize) {
    throw ContractError("vocab_size must cover the " + std::to_string(Vocabulary::kBaseSize) + " base ids");
  }
  if (max_gen_len == 0) throw ContractError("max_gen_len must be at least 1");
  if (!(layer_norm_eps > 0.0)) throw ContractError("layer_norm_eps must be positive");
}

template <typename Real>
Tensor<Real> multi_head_attention(const AttentionParams<Real>& params, const Tensor<Real>& queries,
                                  const Tensor<Real>& keys_values, std::size_t n_heads,
                                  const AttentionMask* mask) {
  const Tensor<Real> q = params.query(queries);
  const Tensor<Real> k = params.key(keys_values);
  const Tensor<Real> v = params.value(keys_values);
  return params.output(attention(q, k, v, n_heads, mask));
}

template <typename Real>
TranscriptionModel<Real>::TranscriptionModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config), seed_(seed) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = config_.d_model;
  token_embedding_ = normal_tensor<Real>({config_.vocab_size, d}, kEmbeddingStd, rng);
  for (std::size_t i = 0; i < config_.encoder_layers; ++i) {
    EncoderLayerParams<Real> layer;
    layer.attn_norm = make_norm<Real>(d);
    layer.self_attn = make_attention<Real>(d, rng);
    layer.ffn_norm = make_norm<Real>(d);
    layer.ffn = make_ffn<Real>(d, config_.d_ff, rng);
    encoder_.push_back(std::move(layer));
  }
  encoder_norm_ = make_norm<Real>(d);
  for (std::size_t i = 0; i < config_.decoder_layers; ++i) {
    DecoderLayerParams<Real> layer;
    layer.self_norm = make_norm<Real>(d);
    layer.self_attn = make_attention<Real>(d, rng);
    layer.cross_norm = make_norm<Real>(d);
    layer.cross_attn = make_attention<Real>(d, rng);
    layer.ffn_norm = make_norm<Real>(d);
    layer.ffn = make_ffn<Real>(d, config_.d_ff, rng);
    decoder_.push_back(std::move(layer));
  }
  decoder_norm_ = make_norm<Real>(d);
  output_.weight = normal_tensor<Real>({d, config_.vocab_size}, kEmbeddingStd, rng);
  output_.bias = Tensor<Real>::zeros({config_.vocab_size}, true);
  positions_ = positional_encoding(config_.max_positions);
}

template <typename Real>
std::vector<Real> TranscriptionModel<Real>::positional_encoding(std::size_t count) const {
  const std::size_t d = config_.d_model;
  std::vector<Real> table(count * d);
  for (std::size_t pos = 0; pos < count; ++pos) {
    for (std::size_t i = 0; i < d; i += 2) {
      const double rate = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
      const double angle = static_cast<double>(pos) * rate;
      table[pos * d + i] = static_cast<Real>(std::sin(angle));
      if (i + 1 < d) table[pos * d + i + 1] = static_cast<Real>(std::cos(angle));
    }
  }
  return table;
}

template <typename Real>
Tensor<Real> TranscriptionModel<Real>::embed(std::span<const std::vector<TokenId>> sequences,
                                             const RunMode& mode) const {
  const std::size_t d = config_.d_model;
  std::vector<TokenId> packed;
  for (const auto& s : sequences) {
    if (s.empty()) throw ContractError("empty token sequence");
    if (s.size() > config_.max_positions) {
      throw LengthError("sequence of length " + std::to_string(s.size()) + " exceeds max_positions " +
                        std::to_string(config_.max_positions));
    }
    packed.insert(packed.end(), s.begin(), s.end());
  }
  std::vector<Real> pe;
  pe.reserve(packed.size() * d);
  for (const auto& s : sequences) {
    pe.insert(pe.end(), positions_.begin(), positions_.begin() + static_cast<std::ptrdiff_t>(s.size() * d));
  }
  const Tensor<Real> tokens =
      scale(embedding(token_embedding_, packed), static_cast<Real>(std::sqrt(static_cast<double>(d))));
  const Tensor<Real> x = add(tokens, Tensor<Real>::from_data({packed.size(), d}, std::move(pe)));
  return maybe_dropout(x, config_, mode);
}

template <typename Real>
EncoderOutput<Real> TranscriptionModel<Real>::encode(std::span<const std::vector<TokenId>> sources,
                                                     const RunMode& mode) const {
  if (sources.empty()) throw ContractError("encode: empty batch");
  auto lengths = lengths_of(sources);
  const AttentionMask mask = AttentionMask::block_diagonal(lengths, lengths, false);
  Tensor<Real> x = embed(sources, mode);
  for (const auto& layer : encoder_) {
    const Tensor<Real> h = norm(x, layer.attn_norm, config_);
    x = add(x, maybe_dropout(multi_head_attention(layer.self_attn, h, h, config_.n_heads, &mask),
                             config_, mode));
    x = add(x, maybe_dropout(feed_forward(layer.ffn, norm(x, layer.ffn_norm, config_)), config_, mode));
  }
  return {norm(x, encoder_norm_, config_), std::move(lengths)};
}

template <typename Real>
Tensor<Real> TranscriptionModel<Real>::decode(const EncoderOutput<Real>& encoded,
                                              std::span<const std::vector<TokenId>> decoder_inputs,
                                              const RunMode& mode) const {
  if (decoder_inputs.size() != encoded.lengths.size()) {
    throw DimensionError("decode: " + std::to_string(decoder_inputs.size()) + " decoder inputs for " +
                         std::to_string(encoded.lengths.size()) + " sources");
  }
  const auto lengths = lengths_of(decoder_inputs);
  const AttentionMask self_mask = AttentionMask::block_diagonal(lengths, lengths, true);
  const AttentionMask cross_mask = AttentionMask::block_diagonal(lengths, encoded.lengths, false);
  Tensor<Real> y = embed(decoder_inputs, mode);
  for (const auto& layer : decoder_) {
    const Tensor<Real> h = norm(y, layer.self_norm, config_);
    y = add(y, maybe_dropout(multi_head_attention(layer.self_attn, h, h, config_.n_heads, &self_mask),
                             config_, mode));
    y = add(y, maybe_dropout(multi_head_attention(layer.cross_attn, norm(y, layer.cross_norm, config_),
                                                  encoded.memory, config_.n_heads, &cross_mask),
                             config_, mode));
    y = add(y, maybe_dropout(feed_forward(layer.ffn, norm(y, layer.ffn_norm, config_)), config_, mode));
  }
  return output_(norm(y, decoder_norm_, config_));
}

template <typename Real>
Tensor<Real> TranscriptionModel<Real>::forward_batch(std::span<const std::vector<TokenId>> sources,
                                                     std::span<const std::vector<TokenId>> decoder_inputs,
                                                     const RunMode& mode) const {
  return decode(encode(sources, mode), decoder_inputs, mode);
}

template <typename Real>
Tensor<Real> TranscriptionModel<Real>::forward(std::span<const TokenId> source,
                                               std::span<const TokenId> decoder_input,
                                               const RunMode& mode) const {
  const std::vector<std::vector<TokenId>> sources{{source.begin(), source.end()}};
  const std::vector<std::vector<TokenId>> targets{{decoder_input.begin(), decoder_input.end()}};
  return forward_batch(sources, targets, mode);
}

template <typename Real>
void TranscriptionModel<Real>::resize_embeddings(std::size_t new_vocab_size) {
  const std::size_t old_size = config_.vocab_size;
  if (new_vocab_size < old_size) {
    throw ContractError("resize_embeddings: cannot shrink vocabulary from " + std::to_string(old_size) +
                        " to " + std::to_string(new_vocab_size));
  }
  if (new_vocab_size == old_size) return;
  const std::size_t d = config_.d_model;
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(old_size), static_cast<std::uint32_t>(new_vocab_size)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> dist(0.0, kEmbeddingStd);

  std::vector<Real> table(token_embedding_.data().begin(), token_embedding_.data().end());
  table.resize(new_vocab_size * d);
  for (std::size_t i = old_size * d; i < table.size(); ++i) table[i] = static_cast<Real>(dist(rng));

  const auto old_w = output_.weight.data();
  std::vector<Real> weight(d * new_vocab_size);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < new_vocab_size; ++c) {
      weight[r * new_vocab_size + c] =
          c < old_size ? old_w[r * old_size + c] : static_cast<Real>(dist(rng));
    }
  }
  std::vector<Real> bias(output_.bias.data().begin(), output_.bias.data().end());
  bias.resize(new_vocab_size, Real(0));

  token_embedding_ = Tensor<Real>::from_data({new_vocab_size, d}, std::move(table), true);
  output_.weight = Tensor<Real>::from_data({d, new_vocab_size}, std::move(weight), true);
  output_.bias = Tensor<Real>::from_data({new_vocab_size}, std::move(bias), true);
  config_.vocab_size = new_vocab_size;
}

template <typename Real>
std::vector<NamedTensor<Real>> TranscriptionModel<Real>::parameters() const {
  std::vector<NamedTensor<Real>> out;
  out.push_back({"embedding.token", token_embedding_});
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    const std::string prefix = "encoder.layer" + std::to_string(i);
    add_norm(out, prefix + ".attn_norm", encoder_[i].attn_norm);
    add_attention(out, prefix + ".self_attn", encoder_[i].self_attn);
    add_norm(out, prefix + ".ffn_norm", encoder_[i].ffn_norm);
    add_ffn(out, prefix + ".ffn", encoder_[i].ffn);
  }
  add_norm(out, "encoder.final_norm", encoder_norm_);
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    const std::string prefix = "decoder.layer" + std::to_string(i);
    add_norm(out, prefix + ".self_norm", decoder_[i].self_norm);
    add_attention(out, prefix + ".self_attn", decoder_[i].self_attn);
    add_norm(out, prefix + ".cross_norm", decoder_[i].cross_norm);
    add_attention(out, prefix + ".cross_attn", decoder_[i].cross_attn);
    add_norm(out, prefix + ".ffn_norm", decoder_[i].ffn_norm);
    add_ffn(out, prefix + ".ffn", decoder_[i].ffn);
  }
  add_norm(out, "decoder.final_norm", decoder_norm_);
  add_linear(out, "output", output_);
  return out;
}

template <typename Real>
TranscriptionModel<Real> TranscriptionModel<Real>::clone() const {
  TranscriptionModel copy(config_, seed_);
  auto from = parameters();
  auto to = copy.parameters();
  for (std::size_t i = 0; i < from.size(); ++i) {
    std::copy(from[i].tensor.data().begin(), from[i].tensor.data().end(), to[i].tensor.mutable_data().begin());
  }
  return copy;
}

template <typename Real>
std::size_t TranscriptionModel<Real>::parameter_count() const {
  return count(parameters(), "");
}

template <typename Real>
std::size_t TranscriptionModel<Real>::encoder_parameter_count() const {
  return count(parameters(), "encoder.");
}

template <typename Real>
std::size_t TranscriptionModel<Real>::decoder_parameter_count() const {
  return count(parameters(), "decoder.");
}

template class TranscriptionModel<float>;
template class TranscriptionModel<double>;
template Tensor<float> multi_head_attention(const AttentionParams<float>&, const Tensor<float>&,
                                            const Tensor<float>&, std::size_t, const AttentionMask*);
template Tensor<double> multi_head_attention(const AttentionParams<double>&, const Tensor<double>&,
                                             const Tensor<double>&, std::size_t, const AttentionMask*);

}  // namespace dgt
