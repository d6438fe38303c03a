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

#ifndef DGT_TRAINING_H_
#define DGT_TRAINING_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dgt/checkpoint.h"
#include "dgt/corpus.h"
#include "dgt/decoding.h"
#include "dgt/model.h"
#include "dgt/tokenizer.h"

namespace dgt {

struct TrainConfig {
  std::size_t batch_size = 4;
  double learning_rate = 3e-4;
  double weight_decay = 1e-2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double val_fraction = 0.10;
  std::uint64_t seed = 0;
  std::size_t max_epochs = 30;
  std::size_t patience = 3;
  bool use_dgt = true;
  // Examples per window that is sorted by source length before batching.
  std::size_t sort_window = 64;
  // Validation rows decoded per epoch; 0 means all of them.
  std::size_t val_limit = 0;
  DecodeConfig decode;

  void validate() const;
};

struct DataSplit {
  std::vector<Example> train;
  std::vector<Example> val;
};

// Seeded shuffle, then the first round(val_fraction * N) rows become the
// validation set. Requires at least 10 examples.
DataSplit split_train_val(const std::vector<Example>& examples, double val_fraction, std::uint64_t seed);

struct AdamWConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

// One decoupled-weight-decay Adam update of a single tensor. `step` is the
// 1-based index of this update.
//   w <- w - lr * wd * w
//   m <- b1 m + (1 - b1) g;  v <- b2 v + (1 - b2) g^2
//   w <- w - lr * (m / (1 - b1^step)) / (sqrt(v / (1 - b2^step)) + eps)
template <typename Real>
void adamw_update(std::span<Real> weights, std::span<const Real> grads, std::span<Real> m, std::span<Real> v,
                  std::uint64_t step, const AdamWConfig& config);

class AdamW {
 public:
  AdamW(std::vector<NamedTensor<float>> params, const AdamWConfig& config);

  // Applies one update from the parameters' current grads. A non-finite
  // gradient throws NumericError before any parameter is touched.
  void step();
  void zero_grad();

  std::uint64_t step_count() const { return step_; }
  const std::vector<NamedTensor<float>>& params() const { return params_; }

  // Moment buffers as named blobs ("optimizer.m/<param>", "optimizer.v/<param>").
  std::vector<TensorBlob> state_blobs() const;
  void load_state(const std::vector<TensorBlob>& blobs, std::uint64_t step);

 private:
  std::vector<NamedTensor<float>> params_;
  AdamWConfig config_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  std::uint64_t step_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  std::uint64_t steps = 0;
  double train_loss = 0.0;
  double val_wer = 0.0;
  bool improved = false;
};

struct Batch {
  std::vector<std::vector<TokenId>> sources;
  std::vector<std::vector<TokenId>> decoder_inputs;
  std::vector<TokenId> targets;  // packed, aligned with decoder input rows
};

// Teacher forcing: the decoder sees [pad] ++ target[:-1] and predicts target.
Batch make_batch(std::span<const EncodedExample> examples, std::span<const std::size_t> order);

// Mean cross-entropy of a batch, ignoring pad targets.
Tensor<float> batch_loss(const Model& model, const Batch& batch, const RunMode& mode);

class Trainer {
 public:
  Trainer(Model model, Vocabulary vocab, TrainConfig config, std::vector<Example> train,
          std::vector<Example> val);

  // Resumes from a checkpoint written by save_state().
  static Trainer resume(const std::filesystem::path& path, TrainConfig config, std::vector<Example> train,
                        std::vector<Example> val);

  EpochRecord run_epoch();
  bool finished() const;
  // Runs epochs until max_epochs or patience is exhausted.
  std::vector<EpochRecord> run(const std::function<void(const EpochRecord&)>& on_epoch = {});

  // Corpus WER of greedy transcriptions of the validation rows.
  double validation_wer() const;

  const Model& model() const { return model_; }
  const Model& best_model() const { return best_model_; }
  const Vocabulary& vocab() const { return vocab_; }
  const TrainConfig& config() const { return config_; }
  std::size_t epoch() const { return epoch_; }
  std::uint64_t step_count() const { return optimizer_.step_count(); }
  const TrainingProgress& progress() const { return progress_; }

  // Best model only (what inference needs).
  void save_best(const std::filesystem::path& path) const;
  // Current weights, optimizer moments, best weights and early-stopping state.
  void save_state(const std::filesystem::path& path) const;

 private:
  std::vector<std::vector<std::size_t>> epoch_batches(std::mt19937_64& rng) const;

  Model model_;
  Model best_model_;
  Vocabulary vocab_;
  TrainConfig config_;
  std::vector<Example> train_rows_;
  std::vector<Example> val_rows_;
  std::vector<EncodedExample> train_encoded_;
  AdamW optimizer_;
  std::size_t epoch_ = 0;
  TrainingProgress progress_;
};

struct TrainResult {
  Model best_model;
  std::vector<EpochRecord> log;
  TrainingProgress progress;
};

// Splits `dataset` 90:10 (per config), trains, and returns the model with
// the lowest validation WER.
TrainResult train(Model model, const Vocabulary& vocab, const std::vector<Example>& dataset,
                  const TrainConfig& config, const std::function<void(const EpochRecord&)>& on_epoch = {});

// Tab-separated epoch lines with fixed precision, identical across runs.
std::string format_epoch_record(const EpochRecord& record);
std::string metrics_log_header();

std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t bound);
void shuffle_indices(std::vector<std::size_t>& indices, std::mt19937_64& rng);

}  // namespace dgt

#endif  // DGT_TRAINING_H_
