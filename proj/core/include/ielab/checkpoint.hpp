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

// Checkpoint container. Layout (see docs/checkpoint_format.md):
//
//   "IELAB-CKPT 1\n"
//   <decimal byte length of the header>"\n"
//   <UTF-8 JSON header: format_version, config, metadata, tensors manifest>
//   <payload: little-endian IEEE-754 float64 values, tensors back to back>
//
// Each manifest entry is {"name", "shape", "offset", "count"} with offset in
// bytes from the start of the payload.

#ifndef IELAB_CHECKPOINT_HPP_
#define IELAB_CHECKPOINT_HPP_

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ielab/tensor.hpp"

namespace ielab {

inline constexpr int kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct Checkpoint {
  nlohmann::json config;
  nlohmann::json metadata;
  std::vector<NamedTensor> tensors;

  // Throws MismatchError when absent.
  const Tensor& get(const std::string& name) const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace ielab

#endif  // IELAB_CHECKPOINT_HPP_
