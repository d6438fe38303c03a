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

#ifndef DGT_EVALUATION_H_
#define DGT_EVALUATION_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dgt/corpus.h"
#include "dgt/metrics.h"

namespace dgt {

struct EvaluationReport {
  WerBreakdown overall;
  std::map<std::string, WerBreakdown> per_district;
  // Seeded 50:50 partition of the index-sorted rows, when requested.
  std::optional<WerBreakdown> public_part;
  std::optional<WerBreakdown> private_part;
  std::size_t rows = 0;
};

// Pairs predictions with references by index. Throws AlignmentError listing
// every index present in one file but not the other.
EvaluationReport evaluate_predictions(const std::vector<Prediction>& predictions,
                                      const std::vector<Example>& references,
                                      std::optional<std::uint64_t> split_seed = std::nullopt);

std::string format_report(const EvaluationReport& report);
// One-line JSON object with the same content.
std::string report_json(const EvaluationReport& report);

}  // namespace dgt

#endif  // DGT_EVALUATION_H_
