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

#ifndef DGT_RUN_CONFIG_H_
#define DGT_RUN_CONFIG_H_

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dgt/model.h"
#include "dgt/training.h"

namespace dgt {

// Effective settings of a run, merged as defaults <- config file <- DGT_SEED
// <- command-line flags. Every field is addressable by a flat key that is
// used both in key=value files and as a --key flag.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::size_t threads = 1;
  std::string train_file;
  std::string checkpoint = "model.dgt";
  std::string metrics_log = "metrics.log";

  static const std::vector<std::string>& keys();

  // Throws ValidationError for an unknown key or an unparsable value.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  // Applies derived defaults: encoder_layers = 3 x decoder_layers and
  // d_ff = 4 x d_model unless those keys were given explicitly; copies
  // max_gen_len into the decode settings.
  void finalize();

  // key=value lines in key order.
  std::string describe() const;

 private:
  std::set<std::string> explicit_;
};

// Parses "key = value" lines; '#' starts a comment. Throws ParseError with the
// line number on a line without '='.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text);

}  // namespace dgt

#endif  // DGT_RUN_CONFIG_H_
