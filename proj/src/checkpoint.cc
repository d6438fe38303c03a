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

#include "dgt/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "dgt/error.h"

namespace dgt {
namespace {

using json = nlohmann::json;
using Kind = CheckpointError::Kind;

constexpr std::string_view kMagic = "DGT1";
// Guards against absurd allocations from corrupted length fields.
constexpr std::uint64_t kMaxRank = 8;

void put_u64(std::string& out, std::uint64_t value) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float value) {
  const auto bits = std::bit_cast<std::uint32_t>(value);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::uint64_t n, const char* what) {
    if (n > bytes_.size() - pos_) {
      throw CheckpointError(Kind::kTruncated, std::string("checkpoint truncated while reading ") + what);
    }
    const auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::uint64_t u64(const char* what) {
    const auto raw = take(8, what);
    std::uint64_t value = 0;
    for (int i = 7; i >= 0; --i) value = (value << 8) | static_cast<unsigned char>(raw[i]);
    return value;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

json config_to_json(const ModelConfig& c) {
  return json{{"d_model", c.d_model},           {"n_heads", c.n_heads},
              {"encoder_layers", c.encoder_layers}, {"decoder_layers", c.decoder_layers},
              {"d_ff", c.d_ff},                 {"dropout", c.dropout},
              {"max_positions", c.max_positions}, {"vocab_size", c.vocab_size},
              {"max_gen_len", c.max_gen_len},   {"layer_norm_eps", c.layer_norm_eps}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.d_model = j.at("d_model").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.encoder_layers = j.at("encoder_layers").get<std::size_t>();
  c.decoder_layers = j.at("decoder_layers").get<std::size_t>();
  c.d_ff = j.at("d_ff").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.max_positions = j.at("max_positions").get<std::size_t>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.max_gen_len = j.at("max_gen_len").get<std::size_t>();
  c.layer_norm_eps = j.at("layer_norm_eps").get<double>();
  return c;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  json header{{"format_version", kCheckpointVersion},
              {"model", config_to_json(checkpoint.config)},
              {"districts", checkpoint.districts},
              {"seed", checkpoint.seed},
              {"step", checkpoint.step},
              {"epoch", checkpoint.epoch},
              {"use_dgt", checkpoint.use_dgt},
              {"tensor_count", checkpoint.tensors.size()}};
  if (checkpoint.progress) {
    const auto& p = *checkpoint.progress;
    header["training"] = json{{"best_val_wer", p.best_val_wer ? json(*p.best_val_wer) : json(nullptr)},
                              {"best_epoch", p.best_epoch},
                              {"epochs_since_improvement", p.epochs_since_improvement},
                              {"optimizer_step", p.optimizer_step}};
  }
  const std::string header_text = header.dump();
  std::string out(kMagic);
  put_u64(out, header_text.size());
  out += header_text;
  for (const auto& blob : checkpoint.tensors) {
    if (shape_numel(blob.shape) != blob.data.size()) {
      throw CheckpointError(Kind::kShapeMismatch, "tensor '" + blob.name + "' data does not match its shape");
    }
    put_u64(out, blob.name.size());
    out += blob.name;
    put_u64(out, blob.shape.size());
    for (std::size_t d : blob.shape) put_u64(out, d);
    for (float v : blob.data) put_f32(out, v);
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  Reader reader(bytes);
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    throw CheckpointError(Kind::kBadMagic, "not a checkpoint (missing DGT1 magic)");
  }
  reader.take(kMagic.size(), "magic");
  const std::uint64_t header_len = reader.u64("header length");
  const auto header_text = reader.take(header_len, "header");
  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::exception& e) {
    throw CheckpointError(Kind::kMalformed, std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  Checkpoint ck;
  std::uint64_t tensor_count = 0;
  try {
    const auto version = header.at("format_version").get<std::uint64_t>();
    if (version != kCheckpointVersion) {
      throw CheckpointError(Kind::kVersionMismatch, "checkpoint format version " + std::to_string(version) +
                                                        " (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    ck.config = config_from_json(header.at("model"));
    ck.districts = header.at("districts").get<std::vector<std::string>>();
    ck.seed = header.at("seed").get<std::uint64_t>();
    ck.step = header.at("step").get<std::uint64_t>();
    ck.epoch = header.at("epoch").get<std::uint64_t>();
    ck.use_dgt = header.at("use_dgt").get<bool>();
    tensor_count = header.at("tensor_count").get<std::uint64_t>();
    if (header.contains("training")) {
      const auto& t = header.at("training");
      TrainingProgress p;
      if (!t.at("best_val_wer").is_null()) p.best_val_wer = t.at("best_val_wer").get<double>();
      p.best_epoch = t.at("best_epoch").get<std::uint64_t>();
      p.epochs_since_improvement = t.at("epochs_since_improvement").get<std::uint64_t>();
      p.optimizer_step = t.at("optimizer_step").get<std::uint64_t>();
      ck.progress = p;
    }
  } catch (const json::exception& e) {
    throw CheckpointError(Kind::kMalformed, std::string("checkpoint header is incomplete: ") + e.what());
  }
  std::set<std::string> names;
  for (std::uint64_t t = 0; t < tensor_count; ++t) {
    TensorBlob blob;
    const std::uint64_t name_len = reader.u64("tensor name length");
    blob.name = std::string(reader.take(name_len, "tensor name"));
    if (!names.insert(blob.name).second) {
      throw CheckpointError(Kind::kMalformed, "tensor '" + blob.name + "' appears twice");
    }
    const std::uint64_t rank = reader.u64("tensor rank");
    if (rank == 0 || rank > kMaxRank) {
      throw CheckpointError(Kind::kMalformed, "tensor '" + blob.name + "' has invalid rank " + std::to_string(rank));
    }
    std::uint64_t numel = 1;
    for (std::uint64_t r = 0; r < rank; ++r) {
      const std::uint64_t d = reader.u64("tensor dims");
      if (d == 0 || numel > (std::uint64_t{1} << 40) / d) {
        throw CheckpointError(Kind::kMalformed, "tensor '" + blob.name + "' has invalid dimensions");
      }
      numel *= d;
      blob.shape.push_back(static_cast<std::size_t>(d));
    }
    const auto raw = reader.take(numel * 4, "tensor data");
    blob.data.resize(numel);
    for (std::uint64_t i = 0; i < numel; ++i) {
      std::uint32_t bits = 0;
      for (int b = 3; b >= 0; --b) bits = (bits << 8) | static_cast<unsigned char>(raw[i * 4 + b]);
      blob.data[i] = std::bit_cast<float>(bits);
    }
    ck.tensors.push_back(std::move(blob));
  }
  if (!reader.done()) throw CheckpointError(Kind::kMalformed, "trailing bytes after the last tensor");
  return ck;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(Kind::kIo, "cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(Kind::kIo, "failed writing '" + path.string() + "'");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::kIo, "cannot open checkpoint '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

std::vector<TensorBlob> model_blobs(const Model& model, const std::string& prefix) {
  std::vector<TensorBlob> blobs;
  for (const auto& p : model.parameters()) {
    blobs.push_back({prefix + p.name, p.tensor.shape(), {p.tensor.data().begin(), p.tensor.data().end()}});
  }
  return blobs;
}

Checkpoint make_checkpoint(const Model& model, const Vocabulary& vocab, std::uint64_t step, std::uint64_t epoch,
                           bool use_dgt) {
  Checkpoint ck;
  ck.config = model.config();
  ck.districts = vocab.district_labels();
  ck.seed = model.seed();
  ck.step = step;
  ck.epoch = epoch;
  ck.use_dgt = use_dgt;
  ck.tensors = model_blobs(model);
  return ck;
}

LoadedModel restore_model(Checkpoint checkpoint, const std::string& prefix) {
  Vocabulary vocab;
  try {
    vocab.register_districts(checkpoint.districts);
  } catch (const ValidationError& e) {
    throw CheckpointError(Kind::kMalformed, std::string("checkpoint district list is invalid: ") + e.what());
  }
  if (vocab.size() != checkpoint.config.vocab_size) {
    throw CheckpointError(Kind::kShapeMismatch, "vocabulary of size " + std::to_string(vocab.size()) +
                                                    " does not match embedding rows " +
                                                    std::to_string(checkpoint.config.vocab_size));
  }
  try {
    checkpoint.config.validate();
  } catch (const ContractError& e) {
    throw CheckpointError(Kind::kMalformed, std::string("checkpoint model config is invalid: ") + e.what());
  }
  Model model(checkpoint.config, checkpoint.seed);
  std::map<std::string, std::size_t> by_name;
  for (std::size_t i = 0; i < checkpoint.tensors.size(); ++i) by_name[checkpoint.tensors[i].name] = i;
  std::vector<bool> consumed(checkpoint.tensors.size(), false);
  for (auto& param : model.parameters()) {
    auto it = by_name.find(prefix + param.name);
    if (it == by_name.end()) {
      throw CheckpointError(Kind::kMalformed, "checkpoint lacks parameter '" + prefix + param.name + "'");
    }
    const TensorBlob& blob = checkpoint.tensors[it->second];
    if (blob.shape != param.tensor.shape()) {
      throw CheckpointError(Kind::kShapeMismatch, "parameter '" + param.name + "' has shape " +
                                                      shape_string(blob.shape) + ", model expects " +
                                                      shape_string(param.tensor.shape()));
    }
    std::copy(blob.data.begin(), blob.data.end(), param.tensor.mutable_data().begin());
    consumed[it->second] = true;
  }
  std::vector<TensorBlob> rest;
  for (std::size_t i = 0; i < checkpoint.tensors.size(); ++i) {
    if (!consumed[i]) rest.push_back(std::move(checkpoint.tensors[i]));
  }
  checkpoint.tensors = std::move(rest);
  return LoadedModel{std::move(model), std::move(vocab), std::move(checkpoint)};
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const Vocabulary& vocab,
                     std::uint64_t step, std::uint64_t epoch, bool use_dgt) {
  write_checkpoint(path, make_checkpoint(model, vocab, step, epoch, use_dgt));
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
  LoadedModel loaded = restore_model(read_checkpoint(path));
  for (const auto& blob : loaded.checkpoint.tensors) {
    if (blob.name.find('/') == std::string::npos) {
      throw CheckpointError(Kind::kMalformed, "unexpected tensor '" + blob.name + "' in checkpoint");
    }
  }
  return loaded;
}

}  // namespace dgt
