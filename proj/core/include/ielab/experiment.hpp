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

// Experiment files and the commands behind the `ielab` tool.
//
// One JSON spec drives every command:
//
//   {
//     "seed": 7,
//     "paths": {"corpus": "corpus.jsonl", "rasters": "rasters", "out": "run",
//               "checkpoint": "run/fold0.ckpt"},
//     "model": {"fusion": "STYLE_CONCAT", "encoder": {"hidden": 64}, ...},
//     "train": {...}, "bucketing": {...}, "generator": {...},
//     "eval": {"subset": "all"}, "ablate": {"features": [...], "repeats": 5}
//   }
//
// Relative paths resolve against the spec file's directory. Every JSON
// output embeds a manifest with the spec hash and the tool version.

#ifndef IELAB_EXPERIMENT_HPP_
#define IELAB_EXPERIMENT_HPP_

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ielab/docstream.hpp"
#include "ielab/model.hpp"
#include "ielab/synthdocs.hpp"
#include "ielab/trainloop.hpp"

namespace ielab {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Stable exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitMismatch = 4;
inline constexpr int kExitContract = 5;

int exit_code_for(const std::exception& e);

struct ExperimentPaths {
  std::filesystem::path corpus;
  std::filesystem::path rasters;
  std::filesystem::path out;
  std::filesystem::path checkpoint;
};

struct ExperimentSpec {
  std::uint64_t seed = 0;
  ExperimentPaths paths;
  ModelSpec model;
  TrainConfig train;
  BucketingConfig bucketing;
  GeneratorConfig generator;
  // Documents scored by eval and ablate: "all", "val" or "test" (the last
  // two read the id lists stored in the checkpoint).
  std::string eval_subset = "all";
  std::vector<StyleFeature> ablate_features = {kAllStyleFeatures.begin(), kAllStyleFeatures.end()};
  int ablate_repeats = 5;
  std::string hash;  // FNV-1a of the spec bytes, hex
};

// Throws ConfigError on a missing seed or malformed section, ParseError on
// invalid JSON.
ExperimentSpec parse_experiment_spec(std::string_view text,
                                     const std::filesystem::path& base_dir = {});
ExperimentSpec load_experiment_spec(const std::filesystem::path& path);

nlohmann::json run_manifest(const ExperimentSpec& spec, std::string_view command);

// Reads page rasters <doc>.page<k>.pgm for every document.
RasterMap load_rasters(std::span<const DocumentRecord> docs, const std::filesystem::path& dir);

// ---- Commands ---------------------------------------------------------------
// Each returns normally on success and throws an ielab::Error otherwise;
// run_command maps exceptions to exit codes.

void cmd_generate(const ExperimentSpec& spec, const std::filesystem::path& out, std::ostream& log);
void cmd_train(const ExperimentSpec& spec, const std::filesystem::path& out, std::ostream& log);
void cmd_eval(const ExperimentSpec& spec, const std::filesystem::path& out, std::ostream& log);
void cmd_ablate(const ExperimentSpec& spec, const std::filesystem::path& out, std::ostream& log);
void cmd_params(const ExperimentSpec& spec, const std::optional<std::filesystem::path>& out,
                std::ostream& log);

// Checkpoint written by cmd_train for one fold.
Checkpoint make_fold_checkpoint(const FoldOutcome& fold, const ExperimentSpec& spec);
// Rebuilds the model and vocabularies stored in a checkpoint. Throws
// MismatchError when the checkpoint's model differs from `expected` in any
// architectural field.
struct LoadedModel {
  ModelSpec spec;
  Vocabularies vocabs;
  BucketingConfig bucketing;
  TrainConfig train;
  std::unique_ptr<TaggerModel> model;
  nlohmann::json metadata;
};
LoadedModel load_model(const Checkpoint& ckpt, const ModelSpec& expected);

// Dispatches `verb` (generate | train | eval | ablate | params). Returns the
// process exit code; messages go to `err`.
int run_command(std::string_view verb, const std::filesystem::path& spec_path,
                const std::optional<std::filesystem::path>& out, std::ostream& log,
                std::ostream& err);

}  // namespace ielab

#endif  // IELAB_EXPERIMENT_HPP_
