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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gtest/gtest.h"

#include "dgt/corpus.h"
#include "oracles.h"

namespace dgt::cli {
namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "dgt");
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override { unsetenv("DGT_SEED"); }
  void TearDown() override { unsetenv("DGT_SEED"); }

  // Small synthetic training file plus the flags of a fast model.
  std::string make_train_file(const std::string& name = "train.csv") {
    const std::string path = dir_.file(name);
    EXPECT_EQ(invoke({"synth", "--out", path, "--per-district", "20", "--seed", "4"}).code, kExitOk);
    return path;
  }
  std::vector<std::string> fast_train_args(const std::string& train, const std::string& tag) {
    return {"train",          "--train_file", train,           "--d_model",     "16", "--n_heads",
            "2",              "--decoder_layers", "1",          "--max_epochs",  "2",  "--max_gen_len",
            "12",             "--checkpoint",  dir_.file(tag + ".dgt"), "--metrics_log", dir_.file(tag + ".log")};
  }

  testing::TempDir dir_;
};

TEST_F(CliTest, StatsOnTwoRowFixture) {
  write_text(dir_.file("t.csv"), "index,district,contents,ipa\n0,d1,abc,xy z\n1,d2,a,q\n");
  const Result r = invoke({"stats", "--train", dir_.file("t.csv")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("train contents rows 2  max 3  min 1  mean 2.00  median 2"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("train ipa      rows 2  max 4  min 1  mean 2.50  median 2.5"), std::string::npos) << r.out;
}

TEST_F(CliTest, StatsJsonWithOov) {
  write_text(dir_.file("train.csv"), "index,district,contents\n0,d,a b\n1,d,c a\n");
  write_text(dir_.file("test.csv"), "index,district,contents\n0,d,b c\n1,d,d e d\n");
  const Result r = invoke({"stats", "--train", dir_.file("train.csv"), "--test", dir_.file("test.csv"), "--json"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("\"oov_count\":2"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("\"oov_rate\":0.5"), std::string::npos) << r.out;
}

TEST_F(CliTest, StatsMissingFile) {
  const Result r = invoke({"stats", "--train", dir_.file("nope.csv")});
  EXPECT_NE(r.code, kExitOk);
  EXPECT_NE(r.err.find("nope.csv"), std::string::npos) << r.err;
}

TEST_F(CliTest, StatsReportsRowNumber) {
  write_text(dir_.file("bad.csv"), "index,district,contents\n0,d,a\n1,d\n");
  const Result r = invoke({"stats", "--train", dir_.file("bad.csv")});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_NE(r.err.find("row 3"), std::string::npos) << r.err;
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_NE(invoke({}).code, kExitOk);
  EXPECT_NE(invoke({"bogus"}).code, kExitOk);
  EXPECT_NE(invoke({"train", "--no_such_key", "1"}).code, kExitOk);
  EXPECT_EQ(invoke({"--version"}).out, std::string(kVersion) + "\n");
}

TEST_F(CliTest, SynthSeedPrecedence) {
  setenv("DGT_SEED", "9", 1);
  ASSERT_EQ(invoke({"synth", "--out", dir_.file("env.csv"), "--per-district", "5"}).code, kExitOk);
  ASSERT_EQ(invoke({"synth", "--out", dir_.file("flag.csv"), "--per-district", "5", "--seed", "9"}).code, kExitOk);
  ASSERT_EQ(invoke({"synth", "--out", dir_.file("other.csv"), "--per-district", "5", "--seed", "10"}).code, kExitOk);
  EXPECT_EQ(read_file(dir_.file("env.csv")), read_file(dir_.file("flag.csv")));
  EXPECT_NE(read_file(dir_.file("env.csv")), read_file(dir_.file("other.csv")));
  const auto rows = load_corpus(dir_.file("env.csv"), true);
  EXPECT_EQ(rows.size(), 10u);
}

TEST_F(CliTest, SynthReportsFloor) {
  const Result r = invoke({"synth", "--out", dir_.file("s.csv"), "--per-district", "50", "--require-ambiguous"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("WER >= 50.00%"), std::string::npos) << r.out;
}

TEST_F(CliTest, TrainFailsFastWithoutDistrictColumn) {
  write_text(dir_.file("nodistrict.csv"), "index,contents,ipa\n0,a,a\n");
  auto args = fast_train_args(dir_.file("nodistrict.csv"), "x");
  const Result r = invoke(args);
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_NE(r.err.find("district"), std::string::npos) << r.err;
  EXPECT_FALSE(std::filesystem::exists(dir_.file("x.log")));
  EXPECT_FALSE(std::filesystem::exists(dir_.file("x.dgt")));
}

TEST_F(CliTest, TrainIsReproducibleAndSelfDescribing) {
  const std::string train = make_train_file();
  const Result a = invoke(fast_train_args(train, "a"));
  ASSERT_EQ(a.code, kExitOk) << a.err;
  const Result b = invoke(fast_train_args(train, "b"));
  ASSERT_EQ(b.code, kExitOk) << b.err;
  const std::string log_a = read_file(dir_.file("a.log"));
  const std::string log_b = read_file(dir_.file("b.log"));
  // The logs differ only in the echoed output paths.
  auto strip_paths = [](std::string log) {
    std::string out;
    std::istringstream in(log);
    for (std::string line; std::getline(in, line);) {
      if (line.rfind("# checkpoint=", 0) == 0 || line.rfind("# metrics_log=", 0) == 0) continue;
      out += line + "\n";
    }
    return out;
  };
  EXPECT_EQ(strip_paths(log_a), strip_paths(log_b));
  EXPECT_EQ(read_file(dir_.file("a.dgt")), read_file(dir_.file("b.dgt")));
  for (const char* expected : {"# dgt train 1.0.0\n", "# seed=0\n", "# batch_size=4\n", "# learning_rate=3e-04\n",
                               "# weight_decay=0.01\n", "# encoder_layers=3\n", "# districts d1,d2\n",
                               "# train_rows 36 val_rows 4\n", "epoch\tsteps\ttrain_loss\tval_wer\timproved\n"}) {
    EXPECT_NE(log_a.find(expected), std::string::npos) << expected << "\n" << log_a;
  }
  EXPECT_NE(a.err.find("effective configuration:"), std::string::npos);
}

TEST_F(CliTest, ConfigFileEnvAndFlagPrecedence) {
  const std::string train = make_train_file();
  write_text(dir_.file("run.cfg"), "# run\nseed = 3\nlearning_rate = 0.001\nmax_epochs = 1\nd_model = 16\n"
                                   "n_heads = 2\ndecoder_layers = 1\nmax_gen_len = 8\ntrain_file = " + train +
                                   "\ncheckpoint = " + dir_.file("c.dgt") + "\nmetrics_log = " + dir_.file("c.log") + "\n");
  setenv("DGT_SEED", "5", 1);
  Result r = invoke({"train", "--config", dir_.file("run.cfg"), "--learning_rate", "0.002"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::string log = read_file(dir_.file("c.log"));
  EXPECT_NE(log.find("# seed=5\n"), std::string::npos) << log;
  EXPECT_NE(log.find("# learning_rate=0.002\n"), std::string::npos) << log;
  EXPECT_NE(log.find("# max_epochs=1\n"), std::string::npos) << log;

  r = invoke({"train", "--config", dir_.file("run.cfg"), "--seed", "7"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  log = read_file(dir_.file("c.log"));
  EXPECT_NE(log.find("# seed=7\n"), std::string::npos) << log;
  EXPECT_NE(log.find("# learning_rate=0.001\n"), std::string::npos) << log;

  write_text(dir_.file("bad.cfg"), "learning_rate 0.1\n");
  r = invoke({"train", "--config", dir_.file("bad.cfg")});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_NE(r.err.find("line 1"), std::string::npos) << r.err;
}

TEST_F(CliTest, ResumeMatchesUninterruptedRun) {
  const std::string train = make_train_file();
  auto full = fast_train_args(train, "full");
  full.insert(full.end(), {"--max_epochs", "3", "--patience", "9"});
  ASSERT_EQ(invoke(full).code, kExitOk);

  auto first = fast_train_args(train, "part");
  first.insert(first.end(), {"--max_epochs", "1", "--patience", "9", "--state", dir_.file("part.state")});
  ASSERT_EQ(invoke(first).code, kExitOk);
  auto rest = fast_train_args(train, "part");
  rest.insert(rest.end(), {"--max_epochs", "3", "--patience", "9", "--resume", dir_.file("part.state")});
  const Result r = invoke(rest);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(read_file(dir_.file("full.dgt")), read_file(dir_.file("part.dgt")));
}

TEST_F(CliTest, InferAndEval) {
  const std::string train = make_train_file();
  ASSERT_EQ(invoke(fast_train_args(train, "m")).code, kExitOk);

  write_text(dir_.file("one.csv"), "index,district,contents\n42,d1,ka\n");
  Result r = invoke({"infer", "--checkpoint", dir_.file("m.dgt"), "--input", dir_.file("one.csv"), "--output",
                     dir_.file("one.pred")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto one = load_predictions(dir_.file("one.pred"));
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].index, 42);

  write_text(dir_.file("mixed.csv"), "index,district,contents\n1,d1,ka\n2,x,ka\n3,d2,so\n");
  r = invoke({"infer", "--checkpoint", dir_.file("m.dgt"), "--input", dir_.file("mixed.csv"), "--output",
              dir_.file("mixed.pred"), "--threads", "2"});
  EXPECT_EQ(r.code, kExitPartial);
  EXPECT_NE(r.err.find("row index 2"), std::string::npos) << r.err;
  const auto mixed = load_predictions(dir_.file("mixed.pred"));
  ASSERT_EQ(mixed.size(), 3u);
  EXPECT_EQ(mixed[2].index, 3);

  // Predictions equal to the references score zero everywhere.
  const auto refs = load_corpus(train, true);
  std::vector<Prediction> perfect;
  for (const auto& ex : refs) perfect.push_back({ex.index, *ex.ipa});
  write_predictions(dir_.file("perfect.pred"), perfect);
  r = invoke({"eval", "--predictions", dir_.file("perfect.pred"), "--references", train, "--split-seed", "1",
              "--summary", dir_.file("summary.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("overall          WER   0.0000%"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("public           WER   0.0000%"), std::string::npos) << r.out;
  EXPECT_NE(read_file(dir_.file("summary.json")).find("\"wer\":0.0"), std::string::npos);

  const Result again = invoke({"eval", "--predictions", dir_.file("mixed.pred"), "--references", train});
  EXPECT_EQ(again.code, kExitFailure);
  EXPECT_NE(again.err.find("missing"), std::string::npos) << again.err;
}

TEST_F(CliTest, EvalSplitIsStable) {
  write_text(dir_.file("refs.csv"), "index,district,contents,ipa\n0,d1,c,a b c d\n1,d1,c,a\n2,d2,c,x y\n3,d2,c,z\n");
  write_text(dir_.file("pred.csv"), "index,ipa\n0,a x c\n1,a b\n2,x y\n3,q\n");
  const Result a = invoke({"eval", "--predictions", dir_.file("pred.csv"), "--references", dir_.file("refs.csv"),
                           "--split-seed", "5"});
  const Result b = invoke({"eval", "--predictions", dir_.file("pred.csv"), "--references", dir_.file("refs.csv"),
                           "--split-seed", "5"});
  ASSERT_EQ(a.code, kExitOk) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out.find("overall          WER  50.0000%  S=2 D=1 I=1 N=8"), std::string::npos) << a.out;
}

}  // namespace
}  // namespace dgt::cli
