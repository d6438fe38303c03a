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

#include "dgt/run_config.h"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "dgt/error.h"

namespace dgt {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::uint64_t to_unsigned(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
    throw ValidationError("'" + key + "' expects a nonnegative integer, got '" + value + "'");
  }
  return out;
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double out = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw ValidationError("'" + key + "' expects a number, got '" + value + "'");
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ValidationError("'" + key + "' expects true/false, got '" + value + "'");
}

std::string format_double(double v) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, result.ptr);
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> kKeys = {
      "adam_beta1",   "adam_beta2",     "adam_eps",     "batch_size",     "beam_width",
      "checkpoint",   "d_ff",           "d_model",      "decoder_layers", "dropout",
      "encoder_layers", "layer_norm_eps", "learning_rate", "max_epochs",  "max_gen_len",
      "max_positions", "metrics_log",   "n_heads",      "patience",       "seed",
      "sort_window",  "threads",        "train_file",   "use_dgt",        "val_fraction",
      "val_limit",    "weight_decay"};
  return kKeys;
}

void RunConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "adam_beta1") train.adam_beta1 = to_double(key, value);
  else if (key == "adam_beta2") train.adam_beta2 = to_double(key, value);
  else if (key == "adam_eps") train.adam_eps = to_double(key, value);
  else if (key == "batch_size") train.batch_size = to_unsigned(key, value);
  else if (key == "beam_width") train.decode.beam_width = to_unsigned(key, value);
  else if (key == "checkpoint") checkpoint = value;
  else if (key == "d_ff") model.d_ff = to_unsigned(key, value);
  else if (key == "d_model") model.d_model = to_unsigned(key, value);
  else if (key == "decoder_layers") model.decoder_layers = to_unsigned(key, value);
  else if (key == "dropout") model.dropout = to_double(key, value);
  else if (key == "encoder_layers") model.encoder_layers = to_unsigned(key, value);
  else if (key == "layer_norm_eps") model.layer_norm_eps = to_double(key, value);
  else if (key == "learning_rate") train.learning_rate = to_double(key, value);
  else if (key == "max_epochs") train.max_epochs = to_unsigned(key, value);
  else if (key == "max_gen_len") model.max_gen_len = to_unsigned(key, value);
  else if (key == "max_positions") model.max_positions = to_unsigned(key, value);
  else if (key == "metrics_log") metrics_log = value;
  else if (key == "n_heads") model.n_heads = to_unsigned(key, value);
  else if (key == "patience") train.patience = to_unsigned(key, value);
  else if (key == "seed") train.seed = to_unsigned(key, value);
  else if (key == "sort_window") train.sort_window = to_unsigned(key, value);
  else if (key == "threads") threads = to_unsigned(key, value);
  else if (key == "train_file") train_file = value;
  else if (key == "use_dgt") train.use_dgt = to_bool(key, value);
  else if (key == "val_fraction") train.val_fraction = to_double(key, value);
  else if (key == "val_limit") train.val_limit = to_unsigned(key, value);
  else if (key == "weight_decay") train.weight_decay = to_double(key, value);
  else throw ValidationError("unknown configuration key '" + key + "'");
  explicit_.insert(key);
}

std::string RunConfig::get(const std::string& key) const {
  if (key == "adam_beta1") return format_double(train.adam_beta1);
  if (key == "adam_beta2") return format_double(train.adam_beta2);
  if (key == "adam_eps") return format_double(train.adam_eps);
  if (key == "batch_size") return std::to_string(train.batch_size);
  if (key == "beam_width") return std::to_string(train.decode.beam_width);
  if (key == "checkpoint") return checkpoint;
  if (key == "d_ff") return std::to_string(model.d_ff);
  if (key == "d_model") return std::to_string(model.d_model);
  if (key == "decoder_layers") return std::to_string(model.decoder_layers);
  if (key == "dropout") return format_double(model.dropout);
  if (key == "encoder_layers") return std::to_string(model.encoder_layers);
  if (key == "layer_norm_eps") return format_double(model.layer_norm_eps);
  if (key == "learning_rate") return format_double(train.learning_rate);
  if (key == "max_epochs") return std::to_string(train.max_epochs);
  if (key == "max_gen_len") return std::to_string(model.max_gen_len);
  if (key == "max_positions") return std::to_string(model.max_positions);
  if (key == "metrics_log") return metrics_log;
  if (key == "n_heads") return std::to_string(model.n_heads);
  if (key == "patience") return std::to_string(train.patience);
  if (key == "seed") return std::to_string(train.seed);
  if (key == "sort_window") return std::to_string(train.sort_window);
  if (key == "threads") return std::to_string(threads);
  if (key == "train_file") return train_file;
  if (key == "use_dgt") return train.use_dgt ? "true" : "false";
  if (key == "val_fraction") return format_double(train.val_fraction);
  if (key == "val_limit") return std::to_string(train.val_limit);
  if (key == "weight_decay") return format_double(train.weight_decay);
  throw ValidationError("unknown configuration key '" + key + "'");
}

void RunConfig::finalize() {
  if (!explicit_.count("encoder_layers")) model.encoder_layers = 3 * model.decoder_layers;
  if (!explicit_.count("d_ff")) model.d_ff = 4 * model.d_model;
  train.decode.max_gen_len = model.max_gen_len;
}

std::string RunConfig::describe() const {
  std::string out;
  for (const auto& key : keys()) out += key + "=" + get(key) + "\n";
  return out;
}

std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", line_no, "line");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line_no, "line");
    entries.emplace_back(key, trim(std::string_view(line).substr(eq + 1)));
  }
  return entries;
}

}  // namespace dgt
