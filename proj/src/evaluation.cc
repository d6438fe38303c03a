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

#include "dgt/evaluation.h"

#include <algorithm>
#include <cstdio>
#include <random>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "dgt/error.h"
#include "dgt/training.h"

namespace dgt {
namespace {

WerBreakdown sum_pairs(const std::vector<std::pair<std::string, std::string>>& pairs) {
  if (pairs.empty()) return {};
  try {
    return corpus_wer(pairs);
  } catch (const ContractError&) {
    WerBreakdown empty;
    empty.skipped = pairs.size();
    return empty;
  }
}

std::string line_for(const std::string& label, const WerBreakdown& w) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-16s WER %8.4f%%  S=%zu D=%zu I=%zu N=%zu", label.c_str(), w.wer(),
                w.substitutions, w.deletions, w.insertions, w.ref_words);
  std::string out = buf;
  if (w.skipped > 0) out += "  (skipped " + std::to_string(w.skipped) + " empty references)";
  return out + "\n";
}

nlohmann::json to_json(const WerBreakdown& w) {
  return {{"wer", w.wer()},        {"substitutions", w.substitutions}, {"deletions", w.deletions},
          {"insertions", w.insertions}, {"ref_words", w.ref_words},   {"skipped", w.skipped}};
}

}  // namespace

EvaluationReport evaluate_predictions(const std::vector<Prediction>& predictions,
                                      const std::vector<Example>& references,
                                      std::optional<std::uint64_t> split_seed) {
  std::unordered_map<std::int64_t, const Prediction*> by_index;
  for (const auto& p : predictions) by_index[p.index] = &p;
  std::vector<long long> missing;
  std::unordered_map<std::int64_t, bool> ref_indices;
  for (const auto& r : references) {
    ref_indices[r.index] = true;
    if (!by_index.count(r.index)) missing.push_back(r.index);
  }
  for (const auto& p : predictions) {
    if (!ref_indices.count(p.index)) missing.push_back(p.index);
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += (i ? ", " : "") + std::to_string(missing[i]);
    if (missing.size() > 20) list += ", ...";
    const std::string what = std::to_string(missing.size()) +
                             " indices missing from either predictions or references: " + list;
    throw AlignmentError(what, std::move(missing));
  }

  std::vector<const Example*> sorted;
  for (const auto& r : references) {
    if (!r.ipa) throw ContractError("reference row " + std::to_string(r.index) + " has no ipa");
    sorted.push_back(&r);
  }
  std::sort(sorted.begin(), sorted.end(), [](const Example* a, const Example* b) { return a->index < b->index; });

  EvaluationReport report;
  report.rows = sorted.size();
  std::vector<std::pair<std::string, std::string>> all;
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> districts;
  for (const Example* r : sorted) {
    std::pair<std::string, std::string> pair{*r->ipa, by_index.at(r->index)->ipa};
    districts[r->district].push_back(pair);
    all.push_back(std::move(pair));
  }
  report.overall = corpus_wer(all);
  for (const auto& [district, pairs] : districts) report.per_district[district] = sum_pairs(pairs);

  if (split_seed) {
    std::vector<std::size_t> order(all.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(*split_seed);
    shuffle_indices(order, rng);
    const std::size_t half = (order.size() + 1) / 2;
    std::vector<std::pair<std::string, std::string>> pub, priv;
    for (std::size_t i = 0; i < order.size(); ++i) (i < half ? pub : priv).push_back(all[order[i]]);
    report.public_part = sum_pairs(pub);
    report.private_part = sum_pairs(priv);
  }
  return report;
}

std::string format_report(const EvaluationReport& report) {
  std::string out = "rows " + std::to_string(report.rows) + "\n";
  out += line_for("overall", report.overall);
  for (const auto& [district, w] : report.per_district) out += line_for("district " + district, w);
  if (report.public_part) out += line_for("public", *report.public_part);
  if (report.private_part) out += line_for("private", *report.private_part);
  return out;
}

std::string report_json(const EvaluationReport& report) {
  nlohmann::json j{{"rows", report.rows}, {"overall", to_json(report.overall)}};
  nlohmann::json districts = nlohmann::json::object();
  for (const auto& [district, w] : report.per_district) districts[district] = to_json(w);
  j["per_district"] = districts;
  if (report.public_part) j["public"] = to_json(*report.public_part);
  if (report.private_part) j["private"] = to_json(*report.private_part);
  return j.dump();
}

}  // namespace dgt
