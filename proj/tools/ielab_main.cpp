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

// ielab <generate|train|eval|ablate|params> --spec <file> [--out <dir>]

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ielab/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Style-aware layout tagging experiments"};
  app.set_version_flag("--version", std::string(ielab::kToolVersion));
  app.require_subcommand(1);

  std::string spec_path;
  std::string out_dir;
  const char* verbs[][2] = {
      {"generate", "Write a synthetic corpus, page rasters and summary.json"},
      {"train", "Cross-validate the configured model; write metrics.json and fold checkpoints"},
      {"eval", "Score a checkpoint; write predictions.jsonl and report.json"},
      {"ablate", "Permutation importance of style features for a style checkpoint"},
      {"params", "Parameter accounting for all fusion modes"},
  };
  for (const auto& [name, help] : verbs) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--spec", spec_path, "Experiment spec (JSON)")->required();
    sub->add_option("--out", out_dir, "Output directory (overrides paths.out)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and --version exit 0; usage errors join the generic failure code.
    const int code = app.exit(e);
    return code == 0 ? ielab::kExitOk : ielab::kExitFailure;
  }

  const std::string verb = app.get_subcommands().front()->get_name();
  std::optional<std::filesystem::path> out;
  if (!out_dir.empty()) out = out_dir;
  return ielab::run_command(verb, spec_path, out, std::cout, std::cerr);
}
