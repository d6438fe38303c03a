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

#include "cli.h"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "dgt/checkpoint.h"
#include "dgt/corpus.h"
#include "dgt/decoding.h"
#include "dgt/error.h"
#include "dgt/evaluation.h"
#include "dgt/run_config.h"
#include "dgt/synthetic.h"
#include "dgt/training.h"

namespace dgt::cli {
namespace {

std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("DGT_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  char* end = nullptr;
  const unsigned long long value = std::strtoull(raw, &end, 10);
  if (end == raw || *end != '\0') throw ValidationError(std::string("DGT_SEED is not an integer: '") + raw + "'");
  return value;
}

std::string column_line(const std::string& label, std::size_t rows, const ColumnStats& s) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-14s rows %zu  max %zu  min %zu  mean %.2f  median %g  unique_words %zu\n",
                label.c_str(), rows, s.max_len, s.min_len, s.mean_len, s.median_len, s.unique_words);
  return buf;
}

nlohmann::json column_json(const ColumnStats& s) {
  return {{"max_len", s.max_len},       {"min_len", s.min_len},         {"mean_len", s.mean_len},
          {"median_len", s.median_len}, {"unique_words", s.unique_words}};
}

int cmd_stats(const std::string& train_path, const std::string& test_path, bool as_json, std::ostream& out) {
  const auto train = load_corpus(train_path, false);
  std::optional<std::vector<Example>> test;
  if (!test_path.empty()) test = load_corpus(test_path, false);
  const CorpusStats stats = compute_stats(train, test ? &*test : nullptr);
  if (as_json) {
    nlohmann::json j{{"train_rows", train.size()}, {"train_contents", column_json(stats.train_contents)}};
    if (stats.train_ipa) j["train_ipa"] = column_json(*stats.train_ipa);
    if (test) j["test_rows"] = test->size();
    if (stats.test_contents) j["test_contents"] = column_json(*stats.test_contents);
    if (stats.test_ipa) j["test_ipa"] = column_json(*stats.test_ipa);
    if (stats.oov_count) j["oov_count"] = *stats.oov_count;
    if (stats.oov_rate) j["oov_rate"] = *stats.oov_rate;
    out << j.dump() << "\n";
    return kExitOk;
  }
  out << column_line("train contents", train.size(), stats.train_contents);
  if (stats.train_ipa) out << column_line("train ipa", train.size(), *stats.train_ipa);
  if (stats.test_contents) out << column_line("test contents", test->size(), *stats.test_contents);
  if (stats.test_ipa) out << column_line("test ipa", test->size(), *stats.test_ipa);
  if (stats.oov_count) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "oov            %zu of %zu test word types (%.2f%%)\n", *stats.oov_count,
                  stats.test_contents->unique_words, *stats.oov_rate * 100.0);
    out << buf;
  }
  return kExitOk;
}

struct SynthOptions {
  std::string out_path;
  std::string rules_path;
  std::vector<std::string> districts;
  std::size_t per_district = 2000;
  std::size_t min_len = 2;
  std::size_t max_len = 8;
  std::optional<std::uint64_t> seed;
  bool require_ambiguous = false;
  std::int64_t first_index = 0;
};

int cmd_synth(const SynthOptions& opt, std::ostream& out) {
  const RuleSet rules = opt.rules_path.empty() ? RuleSet::two_district_default() : RuleSet::load(opt.rules_path);
  SyntheticConfig config;
  config.districts = opt.districts;
  config.per_district = opt.per_district;
  config.min_graphemes = opt.min_len;
  config.max_graphemes = opt.max_len;
  config.seed = opt.seed ? *opt.seed : env_seed().value_or(0);
  config.require_ambiguous = opt.require_ambiguous;
  config.first_index = opt.first_index;
  const SyntheticCorpus corpus = generate_synthetic_corpus(rules, config);
  write_corpus(opt.out_path, corpus.examples, true);
  std::string ambiguous;
  for (const auto& g : rules.ambiguous_graphemes()) ambiguous += (ambiguous.empty() ? "" : " ") + g;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "ambiguity floor: district-blind accuracy %.4f, WER >= %.2f%%\n",
                corpus.ambiguity_floor, corpus.floor_wer());
  out << "wrote " << corpus.examples.size() << " rows to " << opt.out_path << " (seed " << config.seed << ")\n"
      << "alphabet size " << rules.alphabet().size() << ", ambiguous graphemes: " << ambiguous << "\n"
      << buf;
  return kExitOk;
}

struct TrainOptions {
  std::string config_path;
  std::map<std::string, std::string> flags;
  std::string state_path;
  std::string resume_path;
};

RunConfig merged_config(const TrainOptions& opt) {
  RunConfig config;
  if (!opt.config_path.empty()) {
    for (const auto& [key, value] : parse_key_values(read_file(opt.config_path))) config.set(key, value);
  }
  if (auto seed = env_seed()) config.set("seed", std::to_string(*seed));
  for (const auto& [key, value] : opt.flags) config.set(key, value);
  config.finalize();
  config.model.validate();
  config.train.validate();
  return config;
}

int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err) {
  const RunConfig config = merged_config(opt);
  if (config.train_file.empty()) throw ValidationError("train_file is required");
  std::string header = std::string("# dgt train ") + kVersion + "\n";
  for (const auto& key : RunConfig::keys()) header += "# " + key + "=" + config.get(key) + "\n";
  err << "effective configuration:\n" << config.describe();

  const auto rows = load_corpus(config.train_file, true);
  if (rows.empty()) throw ContractError("train: empty dataset");
  const auto labels = district_labels(rows);
  Vocabulary vocab;
  vocab.register_districts(labels);
  ModelConfig model_config = config.model;
  model_config.vocab_size = Vocabulary::kBaseSize;
  Model model(model_config, config.train.seed);
  model.resize_embeddings(vocab.size());

  DataSplit split = split_train_val(rows, config.train.val_fraction, config.train.seed);
  std::string districts;
  for (const auto& l : labels) districts += (districts.empty() ? "" : ",") + l;
  header += "# districts " + districts + "\n";
  header += "# train_rows " + std::to_string(split.train.size()) + " val_rows " + std::to_string(split.val.size()) + "\n";

  std::optional<Trainer> trainer;
  if (!opt.resume_path.empty()) {
    trainer.emplace(Trainer::resume(opt.resume_path, config.train, std::move(split.train), std::move(split.val)));
    header += "# resumed_from_epoch " + std::to_string(trainer->epoch()) + "\n";
  } else {
    trainer.emplace(std::move(model), vocab, config.train, std::move(split.train), std::move(split.val));
  }

  std::ofstream log(config.metrics_log, std::ios::binary | std::ios::trunc);
  if (!log) throw Error("cannot open metrics log '" + config.metrics_log + "'");
  log << header << metrics_log_header();
  log.flush();
  const auto start = std::chrono::steady_clock::now();
  trainer->run([&](const EpochRecord& record) {
    log << format_epoch_record(record);
    log.flush();
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char buf[160];
    std::snprintf(buf, sizeof(buf), "epoch %zu  loss %.4f  val WER %.2f%%%s  (%.0fs)\n", record.epoch,
                  record.train_loss, record.val_wer, record.improved ? "  *" : "", elapsed);
    err << buf;
    if (!opt.state_path.empty()) trainer->save_state(opt.state_path);
  });
  const auto& progress = trainer->progress();
  char tail[128];
  std::snprintf(tail, sizeof(tail), "# best_epoch %llu best_val_wer %.4f\n",
                static_cast<unsigned long long>(progress.best_epoch), progress.best_val_wer.value_or(0.0));
  log << tail;
  trainer->save_best(config.checkpoint);
  out << "best epoch " << progress.best_epoch << ", checkpoint written to " << config.checkpoint << "\n";
  return kExitOk;
}

struct InferOptions {
  std::string checkpoint;
  std::string input;
  std::string output;
  std::size_t threads = 1;
  std::size_t beam_width = 1;
  std::optional<std::size_t> max_gen_len;
};

int cmd_infer(const InferOptions& opt, std::ostream& out, std::ostream& err) {
  const LoadedModel loaded = load_checkpoint(opt.checkpoint);
  const auto rows = load_corpus(opt.input, false);
  DecodeConfig decode;
  decode.max_gen_len = opt.max_gen_len.value_or(loaded.model.config().max_gen_len);
  decode.beam_width = opt.beam_width;
  std::vector<DecodeRequest> requests;
  for (const auto& row : rows) {
    requests.push_back({row.contents, loaded.checkpoint.use_dgt ? std::optional(row.district) : std::nullopt});
  }
  const auto outcomes = batch_decode(loaded.model, loaded.vocab, requests, decode, opt.threads);
  std::vector<Prediction> predictions;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!outcomes[i].ok()) {
      ++failures;
      err << "row index " << rows[i].index << ": " << outcomes[i].error << "\n";
    }
    predictions.push_back({rows[i].index, outcomes[i].ipa.value_or("")});
  }
  write_predictions(opt.output, predictions);
  out << "wrote " << predictions.size() << " predictions to " << opt.output;
  if (failures > 0) out << " (" << failures << " rows failed)";
  out << "\n";
  return failures > 0 ? kExitPartial : kExitOk;
}

int cmd_eval(const std::string& predictions_path, const std::string& references_path,
             std::optional<std::uint64_t> split_seed, const std::string& summary_path, std::ostream& out) {
  const auto predictions = load_predictions(predictions_path);
  const auto references = load_corpus(references_path, true);
  const EvaluationReport report = evaluate_predictions(predictions, references, split_seed);
  const std::string summary = report_json(report);
  out << format_report(report) << "summary " << summary << "\n";
  if (!summary_path.empty()) {
    std::ofstream file(summary_path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error("cannot open '" + summary_path + "' for writing");
    file << summary << "\n";
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"District-guided byte-level text-to-IPA transcription"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  // A repeated flag overrides earlier occurrences.
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  std::string stats_train, stats_test;
  bool stats_json = false;
  auto* stats = app.add_subcommand("stats", "Corpus length, vocabulary and OOV statistics");
  stats->add_option("--train", stats_train, "Training CSV (index,district,contents[,ipa])")->required();
  stats->add_option("--test", stats_test, "Test CSV; enables OOV analysis");
  stats->add_flag("--json", stats_json, "Print a JSON record instead of text");

  SynthOptions synth_opt;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "Generate a district-conditioned synthetic corpus");
  synth->add_option("--out", synth_opt.out_path, "Output CSV")->required();
  synth->add_option("--rules", synth_opt.rules_path, "Rule file (default: built-in two-district rules)");
  synth->add_option("--districts", synth_opt.districts, "Subset of districts to generate")->delimiter(',');
  synth->add_option("--per-district", synth_opt.per_district, "Rows per district");
  synth->add_option("--min-len", synth_opt.min_len, "Minimum graphemes per word");
  synth->add_option("--max-len", synth_opt.max_len, "Maximum graphemes per word");
  auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "Random seed (overrides DGT_SEED)");
  synth->add_flag("--require-ambiguous", synth_opt.require_ambiguous, "Every word contains an ambiguous grapheme");
  synth->add_option("--first-index", synth_opt.first_index, "Index of the first row");

  TrainOptions train_opt;
  std::map<std::string, std::string> train_flags;
  auto* train_cmd = app.add_subcommand("train", "Train a transcription model");
  train_cmd->add_option("--config", train_opt.config_path, "key=value configuration file");
  for (const auto& key : RunConfig::keys()) train_cmd->add_option("--" + key, train_flags[key]);
  train_cmd->add_option("--state", train_opt.state_path, "Write resumable training state here after each epoch");
  train_cmd->add_option("--resume", train_opt.resume_path, "Resume from a state file written by --state");

  InferOptions infer_opt;
  std::size_t infer_max_gen = 0;
  auto* infer = app.add_subcommand("infer", "Transcribe a CSV with a trained checkpoint");
  infer->add_option("--checkpoint", infer_opt.checkpoint, "Checkpoint file")->required();
  infer->add_option("--input", infer_opt.input, "Input CSV (index,district,contents)")->required();
  infer->add_option("--output", infer_opt.output, "Predictions CSV (index,ipa)")->required();
  infer->add_option("--threads", infer_opt.threads, "Decoding threads");
  infer->add_option("--beam_width", infer_opt.beam_width, "1 for greedy, >= 2 for beam search");
  auto* infer_max_gen_opt = infer->add_option("--max_gen_len", infer_max_gen, "Maximum emitted tokens");

  std::string eval_predictions, eval_references, eval_summary;
  std::uint64_t eval_split_seed = 0;
  auto* eval = app.add_subcommand("eval", "Word error rate of predictions against references");
  eval->add_option("--predictions", eval_predictions, "Predictions CSV (index,ipa)")->required();
  eval->add_option("--references", eval_references, "Reference CSV with an ipa column")->required();
  auto* split_opt = eval->add_option("--split-seed", eval_split_seed, "Also score a seeded 50:50 public/private split");
  eval->add_option("--summary", eval_summary, "Write the JSON summary here");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (stats->parsed()) return cmd_stats(stats_train, stats_test, stats_json, out);
    if (synth->parsed()) {
      if (synth_seed_opt->count() > 0) synth_opt.seed = synth_seed;
      return cmd_synth(synth_opt, out);
    }
    if (train_cmd->parsed()) {
      for (const auto& key : RunConfig::keys()) {
        if (train_cmd->get_option("--" + key)->count() > 0) train_opt.flags[key] = train_flags[key];
      }
      return cmd_train(train_opt, out, err);
    }
    if (infer->parsed()) {
      if (infer_max_gen_opt->count() > 0) infer_opt.max_gen_len = infer_max_gen;
      return cmd_infer(infer_opt, out, err);
    }
    if (eval->parsed()) {
      return cmd_eval(eval_predictions, eval_references,
                      split_opt->count() > 0 ? std::optional(eval_split_seed) : std::nullopt, eval_summary, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace dgt::cli
