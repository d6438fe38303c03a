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

#ifndef DGT_CHECKPOINT_H_
#define DGT_CHECKPOINT_H_

// Checkpoint layout (all integers unsigned 64-bit little-endian):
//
//   "DGT1"
//   header length, header bytes (UTF-8 JSON: format_version, model config,
//     ordered district labels, seed, step, epoch, use_dgt, tensor_count,
//     optional training state)
//   tensor_count x { name length, name bytes, rank, dims..., float32 LE data }

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dgt/model.h"
#include "dgt/tokenizer.h"

namespace dgt {

inline constexpr std::uint64_t kCheckpointVersion = 1;

struct TensorBlob {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

// Early-stopping bookkeeping carried across a resume.
struct TrainingProgress {
  std::optional<double> best_val_wer;
  std::uint64_t best_epoch = 0;
  std::uint64_t epochs_since_improvement = 0;
  std::uint64_t optimizer_step = 0;

  bool operator==(const TrainingProgress&) const = default;
};

struct Checkpoint {
  ModelConfig config;
  std::vector<std::string> districts;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  bool use_dgt = true;
  std::optional<TrainingProgress> progress;
  std::vector<TensorBlob> tensors;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
// Throws CheckpointError whose kind() distinguishes bad magic, version
// mismatch, truncation, shape mismatch and other malformed content.
Checkpoint parse_checkpoint(std::string_view bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Model parameters as blobs, in parameter order, optionally name-prefixed.
std::vector<TensorBlob> model_blobs(const Model& model, const std::string& prefix = "");

Checkpoint make_checkpoint(const Model& model, const Vocabulary& vocab, std::uint64_t step = 0,
                           std::uint64_t epoch = 0, bool use_dgt = true);

struct LoadedModel {
  Model model;
  Vocabulary vocab;
  Checkpoint checkpoint;  // tensors not consumed by the model remain here
};

// Rebuilds the model and vocabulary. Every model parameter must appear
// exactly once under `prefix`; other blobs are left in checkpoint.tensors.
LoadedModel restore_model(Checkpoint checkpoint, const std::string& prefix = "");

void save_checkpoint(const std::filesystem::path& path, const Model& model, const Vocabulary& vocab,
                     std::uint64_t step = 0, std::uint64_t epoch = 0, bool use_dgt = true);
LoadedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace dgt

#endif  // DGT_CHECKPOINT_H_
