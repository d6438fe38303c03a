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
#include <limits>
#include <thread>

#include "dgt/error.h"

namespace dgt {
namespace {

TokenId argmax(const std::vector<float>& logits) {
  TokenId best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[static_cast<std::size_t>(best)]) best = static_cast<TokenId>(i);
  }
  return best;
}

std::vector<double> log_softmax(const std::vector<float>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (float v : logits) z += std::exp(static_cast<double>(v) - mx);
  const double log_z = std::log(z) + mx;
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = static_cast<double>(logits[i]) - log_z;
  return out;
}

}  // namespace

void DecodeConfig::validate() const {
  if (max_gen_len == 0) throw ContractError("max_gen_len must be at least 1");
  if (beam_width == 0) throw ContractError("beam_width must be at least 1");
}

ModelScorer::ModelScorer(const Model& model, std::span<const TokenId> source) : model_(model) {
  NoGradGuard no_grad;
  const std::vector<std::vector<TokenId>> sources{{source.begin(), source.end()}};
  encoded_ = model_.encode(sources);
}

std::vector<float> ModelScorer::next_logits(std::span<const TokenId> prefix) {
  NoGradGuard no_grad;
  const std::vector<std::vector<TokenId>> inputs{{prefix.begin(), prefix.end()}};
  const Tensor<float> logits = model_.decode(encoded_, inputs);
  const std::size_t vocab = logits.dim(1);
  const auto data = logits.data();
  return {data.end() - static_cast<std::ptrdiff_t>(vocab), data.end()};
}

SearchResult greedy_search(StepScorer& scorer, std::size_t max_tokens) {
  SearchResult result;
  std::vector<TokenId> prefix{Vocabulary::kPadId};
  while (result.ids.size() < max_tokens) {
    const TokenId next = argmax(scorer.next_logits(prefix));
    result.ids.push_back(next);
    if (next == Vocabulary::kEosId) {
      result.finished = true;
      break;
    }
    prefix.push_back(next);
  }
  return result;
}

SearchResult beam_search(StepScorer& scorer, std::size_t max_tokens, std::size_t beam_width) {
  if (beam_width < 2) return greedy_search(scorer, max_tokens);
  struct Hypothesis {
    std::vector<TokenId> ids;
    double score = 0.0;
  };
  std::vector<Hypothesis> beams{{{}, 0.0}};
  std::optional<Hypothesis> best_finished;
  for (std::size_t step = 0; step < max_tokens && !beams.empty(); ++step) {
    std::vector<Hypothesis> candidates;
    for (const auto& hyp : beams) {
      std::vector<TokenId> prefix{Vocabulary::kPadId};
      prefix.insert(prefix.end(), hyp.ids.begin(), hyp.ids.end());
      const auto logp = log_softmax(scorer.next_logits(prefix));
      std::vector<TokenId> order(logp.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<TokenId>(i);
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(beam_width, order.size())),
                        order.end(), [&](TokenId a, TokenId b) {
                          if (logp[a] != logp[b]) return logp[a] > logp[b];
                          return a < b;
                        });
      for (std::size_t r = 0; r < std::min(beam_width, order.size()); ++r) {
        Hypothesis next = hyp;
        next.ids.push_back(order[r]);
        next.score += logp[order[r]];
        candidates.push_back(std::move(next));
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Hypothesis& a, const Hypothesis& b) { return a.score > b.score; });
    beams.clear();
    for (auto& c : candidates) {
      if (beams.size() >= beam_width) break;
      if (c.ids.back() == Vocabulary::kEosId) {
        if (!best_finished || c.score > best_finished->score) best_finished = c;
      } else {
        beams.push_back(std::move(c));
      }
    }
    // Scores only decrease, so no live beam can overtake a better finished one.
    if (best_finished && (beams.empty() || beams.front().score <= best_finished->score)) break;
  }
  // At the emission cap a live beam may still outscore every finished one.
  if (best_finished && (beams.empty() || best_finished->score >= beams.front().score)) {
    return {best_finished->ids, true};
  }
  if (beams.empty()) return {};
  return {beams.front().ids, false};
}

std::size_t emission_limit(const Model& model, const DecodeConfig& config) {
  return std::min(config.max_gen_len, model.config().max_positions);
}

std::string transcribe(const Model& model, const Vocabulary& vocab, const std::string& text,
                       const std::optional<std::string>& district, const DecodeConfig& config) {
  config.validate();
  if (text.empty()) return {};
  const auto source = district ? encode(vocab, text, *district) : encode(vocab, text);
  ModelScorer scorer(model, source);
  const std::size_t limit = emission_limit(model, config);
  const SearchResult result =
      config.beam_width > 1 ? beam_search(scorer, limit, config.beam_width) : greedy_search(scorer, limit);
  return decode(vocab, result.ids);
}

std::string greedy_decode(const Model& model, const Vocabulary& vocab, const std::string& text,
                          const std::optional<std::string>& district, const DecodeConfig& config) {
  DecodeConfig greedy = config;
  greedy.beam_width = 1;
  return transcribe(model, vocab, text, district, greedy);
}

std::vector<DecodeOutcome> batch_decode(const Model& model, const Vocabulary& vocab,
                                        const std::vector<DecodeRequest>& rows, const DecodeConfig& config,
                                        std::size_t threads) {
  config.validate();
  std::vector<DecodeOutcome> outcomes(rows.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < rows.size(); i += stride) {
      try {
        outcomes[i].ipa = transcribe(model, vocab, rows[i].text, rows[i].district, config);
      } catch (const std::exception& e) {
        outcomes[i].error = e.what();
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, rows.size()));
  if (workers == 1) {
    work(0, 1);
    return outcomes;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
  for (auto& t : pool) t.join();
  return outcomes;
}

}  // namespace dgt
