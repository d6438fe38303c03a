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

#ifndef DGT_DECODING_H_
#define DGT_DECODING_H_

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dgt/model.h"
#include "dgt/tokenizer.h"

namespace dgt {

struct DecodeConfig {
  std::size_t max_gen_len = 1024;
  // 1 selects greedy search; >= 2 selects beam search of that width.
  std::size_t beam_width = 1;

  void validate() const;
};

// Produces next-token logits for a decoder prefix that starts with the start
// symbol. Implementations hold whatever per-source state they need.
class StepScorer {
 public:
  virtual ~StepScorer() = default;
  virtual std::vector<float> next_logits(std::span<const TokenId> prefix) = 0;
};

// Runs the encoder once and the decoder over the full prefix at each step.
class ModelScorer : public StepScorer {
 public:
  ModelScorer(const Model& model, std::span<const TokenId> source);
  std::vector<float> next_logits(std::span<const TokenId> prefix) override;

 private:
  const Model& model_;
  EncoderOutput<float> encoded_;
};

struct SearchResult {
  // Emitted ids, including the terminating eos when one was produced.
  std::vector<TokenId> ids;
  bool finished = false;  // eos was emitted
};

// Argmax at each step, ties toward the lowest id. Stops after eos or
// `max_tokens` emitted ids.
SearchResult greedy_search(StepScorer& scorer, std::size_t max_tokens);

// Beam search over summed log-probabilities; finished hypotheses compete on
// their total score.
SearchResult beam_search(StepScorer& scorer, std::size_t max_tokens, std::size_t beam_width);

// Emission cap for a model: max_gen_len bounded by the positional capacity.
std::size_t emission_limit(const Model& model, const DecodeConfig& config);

// Transcribes one row. Empty text yields an empty transcription.
std::string greedy_decode(const Model& model, const Vocabulary& vocab, const std::string& text,
                          const std::optional<std::string>& district, const DecodeConfig& config);

// Same as greedy_decode but honors config.beam_width.
std::string transcribe(const Model& model, const Vocabulary& vocab, const std::string& text,
                       const std::optional<std::string>& district, const DecodeConfig& config);

struct DecodeRequest {
  std::string text;
  std::optional<std::string> district;
};

struct DecodeOutcome {
  std::optional<std::string> ipa;  // empty on failure
  std::string error;
  bool ok() const { return ipa.has_value(); }
};

// Decodes rows independently on up to `threads` workers; results keep input
// order and a failing row does not stop the batch.
std::vector<DecodeOutcome> batch_decode(const Model& model, const Vocabulary& vocab,
                                        const std::vector<DecodeRequest>& rows,
                                        const DecodeConfig& config, std::size_t threads = 1);

}  // namespace dgt

#endif  // DGT_DECODING_H_
