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

#include "dgt/training.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "dgt/error.h"
#include "dgt/metrics.h"

namespace dgt {
namespace {

std::mt19937_64 epoch_rng(std::uint64_t seed, std::size_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x5eedu};
  return std::mt19937_64(seq);
}

AdamWConfig adamw_config(const TrainConfig& c) {
  return {c.learning_rate, c.adam_beta1, c.adam_beta2, c.adam_eps, c.weight_decay};
}

const std::string kMomentPrefix = "optimizer.m/";
const std::string kVelocityPrefix = "optimizer.v/";
const std::string kBestPrefix = "best/";

}  // namespace

std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t bound) {
  if (bound == 0) throw ContractError("uniform_index: empty range");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw = rng();
  while (draw >= limit) draw = rng();
  return draw % bound;
}

void shuffle_indices(std::vector<std::size_t>& indices, std::mt19937_64& rng) {
  for (std::size_t i = indices.size(); i > 1; --i) {
    std::swap(indices[i - 1], indices[uniform_index(rng, i)]);
  }
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ContractError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ContractError("learning_rate must be positive");
  if (weight_decay < 0.0) throw ContractError("weight_decay must be nonnegative");
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0) {
    throw ContractError("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ContractError("adam_eps must be positive");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ContractError("val_fraction must lie in (0, 1)");
  if (max_epochs == 0) throw ContractError("max_epochs must be positive");
  if (sort_window == 0) throw ContractError("sort_window must be positive");
  decode.validate();
}

DataSplit split_train_val(const std::vector<Example>& examples, double val_fraction, std::uint64_t seed) {
  if (examples.size() < 10) {
    throw ContractError("split_train_val: need at least 10 examples, got " + std::to_string(examples.size()));
  }
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ContractError("val_fraction must lie in (0, 1)");
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  shuffle_indices(order, rng);
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(examples.size())));
  DataSplit split;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_val ? split.val : split.train).push_back(examples[order[i]]);
  }
  return split;
}

template <typename Real>
void adamw_update(std::span<Real> weights, std::span<const Real> grads, std::span<Real> m, std::span<Real> v,
                  std::uint64_t step, const AdamWConfig& config) {
  if (grads.size() != weights.size() || m.size() != weights.size() || v.size() != weights.size()) {
    throw DimensionError("adamw_update: weight, grad and moment lengths differ");
  }
  if (step == 0) throw ContractError("adamw_update: step index is 1-based");
  const double b1 = config.beta1, b2 = config.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step));
  const Real decay = static_cast<Real>(1.0 - config.learning_rate * config.weight_decay);
  const Real step_size = static_cast<Real>(config.learning_rate / correction1);
  const Real inv_sqrt_c2 = static_cast<Real>(1.0 / std::sqrt(correction2));
  const Real eps = static_cast<Real>(config.eps);
  const Real rb1 = static_cast<Real>(b1), rb2 = static_cast<Real>(b2);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const Real g = grads[i];
    weights[i] *= decay;
    m[i] = rb1 * m[i] + (Real(1) - rb1) * g;
    v[i] = rb2 * v[i] + (Real(1) - rb2) * g * g;
    weights[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_c2 + eps);
  }
}

template void adamw_update(std::span<float>, std::span<const float>, std::span<float>, std::span<float>,
                           std::uint64_t, const AdamWConfig&);
template void adamw_update(std::span<double>, std::span<const double>, std::span<double>, std::span<double>,
                           std::uint64_t, const AdamWConfig&);

AdamW::AdamW(std::vector<NamedTensor<float>> params, const AdamWConfig& config)
    : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0f);
    v_.emplace_back(p.tensor.numel(), 0.0f);
  }
}

void AdamW::step() {
  for (const auto& p : params_) {
    for (float g : p.tensor.grad()) {
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient in '" + p.name + "' at optimizer step " + std::to_string(step_ + 1));
      }
    }
  }
  ++step_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& tensor = params_[i].tensor;
    if (!tensor.has_grad()) continue;
    adamw_update<float>(tensor.mutable_data(), tensor.grad(), m_[i], v_[i], step_, config_);
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

std::vector<TensorBlob> AdamW::state_blobs() const {
  std::vector<TensorBlob> blobs;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    blobs.push_back({kMomentPrefix + params_[i].name, params_[i].tensor.shape(), m_[i]});
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    blobs.push_back({kVelocityPrefix + params_[i].name, params_[i].tensor.shape(), v_[i]});
  }
  return blobs;
}

void AdamW::load_state(const std::vector<TensorBlob>& blobs, std::uint64_t step) {
  std::map<std::string, const TensorBlob*> by_name;
  for (const auto& b : blobs) by_name[b.name] = &b;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    for (auto [prefix, buffer] : {std::pair{&kMomentPrefix, &m_[i]}, std::pair{&kVelocityPrefix, &v_[i]}}) {
      auto it = by_name.find(*prefix + params_[i].name);
      if (it == by_name.end()) {
        throw CheckpointError(CheckpointError::Kind::kMalformed,
                              "checkpoint lacks optimizer state '" + *prefix + params_[i].name + "'");
      }
      if (it->second->shape != params_[i].tensor.shape()) {
        throw CheckpointError(CheckpointError::Kind::kShapeMismatch,
                              "optimizer state '" + it->second->name + "' has the wrong shape");
      }
      *buffer = it->second->data;
    }
  }
  step_ = step;
}

Batch make_batch(std::span<const EncodedExample> examples, std::span<const std::size_t> order) {
  Batch batch;
  for (std::size_t idx : order) {
    const EncodedExample& ex = examples[idx];
    batch.sources.push_back(ex.source);
    std::vector<TokenId> input{Vocabulary::kPadId};
    input.insert(input.end(), ex.target.begin(), ex.target.end() - 1);
    batch.decoder_inputs.push_back(std::move(input));
    batch.targets.insert(batch.targets.end(), ex.target.begin(), ex.target.end());
  }
  return batch;
}

Tensor<float> batch_loss(const Model& model, const Batch& batch, const RunMode& mode) {
  const Tensor<float> logits = model.forward_batch(batch.sources, batch.decoder_inputs, mode);
  return cross_entropy(logits, batch.targets, Vocabulary::kPadId);
}

Trainer::Trainer(Model model, Vocabulary vocab, TrainConfig config, std::vector<Example> train,
                 std::vector<Example> val)
    : model_(std::move(model)),
      best_model_(model_.clone()),
      vocab_(std::move(vocab)),
      config_(std::move(config)),
      train_rows_(std::move(train)),
      val_rows_(std::move(val)),
      optimizer_(model_.parameters(), adamw_config(config_)) {
  config_.validate();
  if (train_rows_.empty()) throw ContractError("train: empty training set");
  if (model_.config().vocab_size != vocab_.size()) {
    throw ContractError("model has " + std::to_string(model_.config().vocab_size) +
                        " embedding rows but the vocabulary has " + std::to_string(vocab_.size()) +
                        " ids; resize the embeddings first");
  }
  train_encoded_ = attach_dgt(train_rows_, vocab_, config_.use_dgt);
  // Validates the validation rows up front as well.
  attach_dgt(val_rows_, vocab_, config_.use_dgt);
}

Trainer Trainer::resume(const std::filesystem::path& path, TrainConfig config, std::vector<Example> train,
                        std::vector<Example> val) {
  Checkpoint ck = read_checkpoint(path);
  if (!ck.progress) {
    throw CheckpointError(CheckpointError::Kind::kMalformed, "checkpoint carries no training state");
  }
  const TrainingProgress progress = *ck.progress;
  const std::uint64_t epoch = ck.epoch;
  LoadedModel current = restore_model(std::move(ck));
  Checkpoint rest = std::move(current.checkpoint);
  std::vector<TensorBlob> optimizer_blobs;
  std::vector<TensorBlob> best_blobs;
  for (auto& blob : rest.tensors) {
    (blob.name.rfind(kBestPrefix, 0) == 0 ? best_blobs : optimizer_blobs).push_back(std::move(blob));
  }
  rest.tensors = std::move(best_blobs);
  LoadedModel best = restore_model(std::move(rest), kBestPrefix);

  config.use_dgt = best.checkpoint.use_dgt;
  Trainer trainer(std::move(current.model), std::move(current.vocab), std::move(config), std::move(train),
                  std::move(val));
  trainer.best_model_ = std::move(best.model);
  trainer.optimizer_.load_state(optimizer_blobs, progress.optimizer_step);
  trainer.epoch_ = epoch;
  trainer.progress_ = progress;
  return trainer;
}

std::vector<std::vector<std::size_t>> Trainer::epoch_batches(std::mt19937_64& rng) const {
  std::vector<std::size_t> order(train_encoded_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle_indices(order, rng);
  for (std::size_t begin = 0; begin < order.size(); begin += config_.sort_window) {
    const auto first = order.begin() + static_cast<std::ptrdiff_t>(begin);
    const auto last = order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), begin + config_.sort_window));
    std::stable_sort(first, last, [&](std::size_t a, std::size_t b) {
      return train_encoded_[a].source.size() < train_encoded_[b].source.size();
    });
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t begin = 0; begin < order.size(); begin += config_.batch_size) {
    const std::size_t end = std::min(order.size(), begin + config_.batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

double Trainer::validation_wer() const {
  if (val_rows_.empty()) return 0.0;
  const std::size_t count =
      config_.val_limit == 0 ? val_rows_.size() : std::min(config_.val_limit, val_rows_.size());
  std::vector<DecodeRequest> requests;
  for (std::size_t i = 0; i < count; ++i) {
    requests.push_back({val_rows_[i].contents,
                        config_.use_dgt ? std::optional<std::string>(val_rows_[i].district) : std::nullopt});
  }
  DecodeConfig greedy = config_.decode;
  greedy.beam_width = 1;
  const auto outcomes = batch_decode(model_, vocab_, requests, greedy);
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t i = 0; i < count; ++i) {
    pairs.emplace_back(*val_rows_[i].ipa, outcomes[i].ipa.value_or(""));
  }
  return corpus_wer(pairs).wer();
}

EpochRecord Trainer::run_epoch() {
  ++epoch_;
  std::mt19937_64 rng = epoch_rng(config_.seed, epoch_);
  const auto batches = epoch_batches(rng);
  const RunMode mode{true, &rng};
  double total_loss = 0.0;
  for (const auto& indices : batches) {
    const Batch batch = make_batch(train_encoded_, indices);
    const Tensor<float> loss = batch_loss(model_, batch, mode);
    loss.backward();
    optimizer_.step();
    optimizer_.zero_grad();
    total_loss += static_cast<double>(loss.item());
  }
  EpochRecord record;
  record.epoch = epoch_;
  record.steps = optimizer_.step_count();
  record.train_loss = total_loss / static_cast<double>(batches.size());
  record.val_wer = validation_wer();
  record.improved = !progress_.best_val_wer || record.val_wer < *progress_.best_val_wer;
  progress_.optimizer_step = optimizer_.step_count();
  if (record.improved) {
    progress_.best_val_wer = record.val_wer;
    progress_.best_epoch = epoch_;
    progress_.epochs_since_improvement = 0;
    best_model_ = model_.clone();
  } else {
    ++progress_.epochs_since_improvement;
  }
  return record;
}

bool Trainer::finished() const {
  return epoch_ >= config_.max_epochs ||
         (config_.patience > 0 && progress_.epochs_since_improvement >= config_.patience);
}

std::vector<EpochRecord> Trainer::run(const std::function<void(const EpochRecord&)>& on_epoch) {
  std::vector<EpochRecord> log;
  while (!finished()) {
    log.push_back(run_epoch());
    if (on_epoch) on_epoch(log.back());
  }
  return log;
}

void Trainer::save_best(const std::filesystem::path& path) const {
  write_checkpoint(path, make_checkpoint(best_model_, vocab_, progress_.optimizer_step, progress_.best_epoch,
                                         config_.use_dgt));
}

void Trainer::save_state(const std::filesystem::path& path) const {
  Checkpoint ck = make_checkpoint(model_, vocab_, optimizer_.step_count(), epoch_, config_.use_dgt);
  for (auto& blob : model_blobs(best_model_, kBestPrefix)) ck.tensors.push_back(std::move(blob));
  for (auto& blob : optimizer_.state_blobs()) ck.tensors.push_back(std::move(blob));
  ck.progress = progress_;
  write_checkpoint(path, ck);
}

TrainResult train(Model model, const Vocabulary& vocab, const std::vector<Example>& dataset,
                  const TrainConfig& config, const std::function<void(const EpochRecord&)>& on_epoch) {
  if (dataset.empty()) throw ContractError("train: empty dataset");
  DataSplit split = split_train_val(dataset, config.val_fraction, config.seed);
  Trainer trainer(std::move(model), vocab, config, std::move(split.train), std::move(split.val));
  auto log = trainer.run(on_epoch);
  return TrainResult{trainer.best_model().clone(), std::move(log), trainer.progress()};
}

std::string metrics_log_header() { return "epoch\tsteps\ttrain_loss\tval_wer\timproved\n"; }

std::string format_epoch_record(const EpochRecord& record) {
  char line[160];
  std::snprintf(line, sizeof(line), "%zu\t%llu\t%.6f\t%.4f\t%d\n", record.epoch,
                static_cast<unsigned long long>(record.steps), record.train_loss, record.val_wer,
                record.improved ? 1 : 0);
  return line;
}

}  // namespace dgt
