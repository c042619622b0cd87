// Copyright 2026 The ielab Authors.
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

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ielab/checkpoint.hpp"
#include "ielab/docstream.hpp"
#include "ielab/error.hpp"
#include "ielab/experiment.hpp"

namespace fs = std::filesystem;

namespace ielab {
namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void put(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "ielab_experiment_test";
    fs::remove_all(dir_);
    for (const char* sub : {"data", "again", "concat", "concat2", "base", "params"}) {
      fs::create_directories(dir_ / sub);
    }
    put(dir_ / "gen.json", R"({"seed": 3, "paths": {"out": "data"},
                               "generator": {"n_docs": 12, "tokens_per_doc": [24, 30]}})");
    ASSERT_EQ(run("generate", dir_ / "gen.json"), kExitOk);
  }

  static std::string small_spec(const std::string& fusion, const std::string& out) {
    return R"({"seed": 3, "paths": {"corpus": "data/corpus.jsonl", "rasters": "data/rasters",
               "out": ")" + out + R"(", "checkpoint": ")" + out + R"(/fold0.ckpt"},
               "model": {"fusion": ")" + fusion + R"(", "style_dim": 4,
                         "encoder": {"hidden": 8, "layers": 1, "heads": 2, "ff_dim": 8}},
               "train": {"epochs": 2, "folds": 2, "lr": 0.001},
               "ablate": {"features": ["bold", "color"], "repeats": 1}})";
  }

  static int run(std::string_view verb, const fs::path& spec,
                 std::optional<fs::path> out = std::nullopt) {
    std::ostringstream log, err;
    const int code = run_command(verb, spec, out, log, err);
    last_err_ = err.str();
    return code;
  }

  static inline fs::path dir_;
  static inline std::string last_err_;
};

TEST_F(Cli, GenerateIsDeterministic) {
  EXPECT_TRUE(fs::exists(dir_ / "data" / "summary.json"));
  EXPECT_TRUE(fs::exists(raster_path(dir_ / "data" / "rasters", "tradeconf-00000", 0)));
  ASSERT_EQ(run("generate", dir_ / "gen.json", dir_ / "again"), kExitOk);
  EXPECT_EQ(slurp(dir_ / "again" / "corpus.jsonl"), slurp(dir_ / "data" / "corpus.jsonl"));
  const auto summary = nlohmann::json::parse(slurp(dir_ / "data" / "summary.json"));
  EXPECT_EQ(summary["manifest"]["seed"], 3);
  EXPECT_EQ(summary["manifest"]["command"], "generate");
}

TEST_F(Cli, TrainEvalAblateRoundTrip) {
  put(dir_ / "concat.json", small_spec("STYLE_CONCAT", "concat"));
  ASSERT_EQ(run("train", dir_ / "concat.json"), kExitOk) << last_err_;
  const std::string first = slurp(dir_ / "concat" / "metrics.json");
  ASSERT_EQ(run("train", dir_ / "concat.json", dir_ / "concat2"), kExitOk);
  EXPECT_EQ(first, slurp(dir_ / "concat2" / "metrics.json"));
  const auto metrics = nlohmann::json::parse(first);
  EXPECT_EQ(metrics["per_fold"].size(), 2u);
  EXPECT_TRUE(fs::exists(dir_ / "concat" / "fold1.ckpt"));

  ASSERT_EQ(run("eval", dir_ / "concat.json"), kExitOk) << last_err_;
  const auto report = nlohmann::json::parse(slurp(dir_ / "concat" / "report.json"));
  EXPECT_EQ(report["documents"], 12);
  ASSERT_EQ(run("ablate", dir_ / "concat.json"), kExitOk) << last_err_;
  const auto ablation = nlohmann::json::parse(slurp(dir_ / "concat" / "ablation.json"));
  EXPECT_EQ(ablation["ranking"].size(), 2u);

  // A checkpoint read under a different architecture.
  put(dir_ / "wrong.json", small_spec("STYLE_SUM", "concat"));
  EXPECT_EQ(run("eval", dir_ / "wrong.json"), kExitMismatch);
  EXPECT_NE(last_err_.find("STYLE"), std::string::npos) << last_err_;
}

TEST_F(Cli, TrainedRunsAgreeWithStoredNumbers) {
  put(dir_ / "concat.json", small_spec("STYLE_CONCAT", "concat"));
  if (!fs::exists(dir_ / "concat" / "metrics.json")) {
    ASSERT_EQ(run("train", dir_ / "concat.json"), kExitOk) << last_err_;
  }
  const auto concat = nlohmann::json::parse(slurp(dir_ / "concat" / "metrics.json"));
  double mean = 0;
  for (double f : concat["per_fold"]) mean += f / 2.0;
  EXPECT_NEAR(concat["mean"].get<double>(), mean, 1e-15);

  // Style tables plus the wider head over the BASELINE of the same fold.
  put(dir_ / "base.json", small_spec("BASELINE", "base"));
  ASSERT_EQ(run("train", dir_ / "base.json"), kExitOk) << last_err_;
  const auto base = nlohmann::json::parse(slurp(dir_ / "base" / "metrics.json"));
  const Checkpoint ckpt = read_checkpoint(dir_ / "concat" / "fold0.ckpt");
  const Vocabularies v = vocabularies_from_json(ckpt.config.at("vocabularies"));
  std::size_t buckets = 0;
  for (int n : v.styles.sizes()) buckets += static_cast<std::size_t>(n);
  const auto labels = static_cast<std::size_t>(v.labels.size());
  EXPECT_EQ(concat["params"].get<std::size_t>() - base["params"].get<std::size_t>(),
            buckets * 4 + 5 * 4 * labels);

  // Evaluating the stored validation split reproduces the selection score.
  put(dir_ / "val.json", R"({"seed": 3, "paths": {"corpus": "data/corpus.jsonl", "out": "params",
      "checkpoint": "concat/fold0.ckpt"},
      "model": {"fusion": "STYLE_CONCAT", "style_dim": 4,
                "encoder": {"hidden": 8, "layers": 1, "heads": 2, "ff_dim": 8}},
      "train": {"epochs": 2, "folds": 2, "lr": 0.001}, "eval": {"subset": "val"}})");
  ASSERT_EQ(run("eval", dir_ / "val.json"), kExitOk) << last_err_;
  const auto report = nlohmann::json::parse(slurp(dir_ / "params" / "report.json"));
  EXPECT_NEAR(report["weighted_f1"].get<double>(),
              concat["folds"][0]["best_val_f1"].get<double>(), 1e-12);
}

TEST_F(Cli, AblatingEveryFeatureRanksFive) {
  put(dir_ / "concat.json", small_spec("STYLE_CONCAT", "concat"));
  if (!fs::exists(dir_ / "concat" / "fold0.ckpt")) {
    ASSERT_EQ(run("train", dir_ / "concat.json"), kExitOk) << last_err_;
  }
  std::string spec = small_spec("STYLE_CONCAT", "concat");
  spec.replace(spec.find(R"(["bold", "color"])"), 17,
               R"(["font", "fontSize", "bold", "color", "inTable"])");
  put(dir_ / "all5.json", spec);
  ASSERT_EQ(run("ablate", dir_ / "all5.json", dir_ / "params"), kExitOk) << last_err_;
  const auto ablation = nlohmann::json::parse(slurp(dir_ / "params" / "ablation.json"));
  EXPECT_EQ(ablation["ranking"].size(), 5u);
}

TEST_F(Cli, AblateNeedsStyleModel) {
  put(dir_ / "base.json", small_spec("BASELINE", "base"));
  EXPECT_EQ(run("ablate", dir_ / "base.json"), kExitContract);
}

TEST_F(Cli, ErrorsMapToExitCodes) {
  EXPECT_EQ(run("train", dir_ / "missing.json"), kExitIo);
  put(dir_ / "noseed.json", R"({"paths": {"out": "x"}})");
  EXPECT_EQ(run("generate", dir_ / "noseed.json"), kExitData);
  EXPECT_NE(last_err_.find("seed"), std::string::npos);
  put(dir_ / "broken.json", "{\"seed\": ");
  EXPECT_EQ(run("generate", dir_ / "broken.json"), kExitData);
  fs::create_directories(dir_ / "bad");
  put(dir_ / "bad" / "corpus.jsonl", "{\"id\": \"a\", \"pages\": [], \"tokens\": 3}\n");
  put(dir_ / "bad.json", R"({"seed": 1, "paths": {"corpus": "bad/corpus.jsonl", "out": "bad"}})");
  EXPECT_EQ(run("train", dir_ / "bad.json"), kExitData);
  put(dir_ / "nockpt.json", small_spec("BASELINE", "nowhere"));
  EXPECT_EQ(run("eval", dir_ / "nockpt.json"), kExitIo);
  put(dir_ / "noout.json", small_spec("BASELINE", "not_created"));
  EXPECT_EQ(run("train", dir_ / "noout.json"), kExitIo);
  EXPECT_NE(last_err_.find("does not exist"), std::string::npos);
  EXPECT_EQ(run("frobnicate", dir_ / "gen.json"), kExitFailure);
}

TEST_F(Cli, ParamsReportsFullScaleDelta) {
  put(dir_ / "params.json", small_spec("STYLE_SUM", "params"));
  std::ostringstream log, err;
  ASSERT_EQ(run_command("params", dir_ / "params.json", dir_ / "params", log, err), kExitOk);
  EXPECT_NE(log.str().find("+0.012%"), std::string::npos) << log.str();
  EXPECT_NE(log.str().find("44.28%"), std::string::npos);
  EXPECT_NE(log.str().find("30.69%"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "params" / "params.json"));
}

TEST_F(Cli, ToolBinaryReportsExitCodes) {
  const char* tool = std::getenv("IELAB_TOOL");
  if (tool == nullptr) GTEST_SKIP() << "IELAB_TOOL not set";
  const std::string quiet = " > /dev/null 2>&1";
  EXPECT_EQ(std::system((std::string(tool) + " --version" + quiet).c_str()), 0);
  const int missing =
      std::system((std::string(tool) + " train --spec " + (dir_ / "missing.json").string() + quiet)
                      .c_str());
  ASSERT_TRUE(WIFEXITED(missing));
  EXPECT_EQ(WEXITSTATUS(missing), kExitIo);
  const int usage = std::system((std::string(tool) + " frobnicate" + quiet).c_str());
  ASSERT_TRUE(WIFEXITED(usage));
  EXPECT_EQ(WEXITSTATUS(usage), kExitFailure);
}

}  // namespace
}  // namespace ielab
