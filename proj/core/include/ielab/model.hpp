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

// The complete token tagger: layout encoder, one fusion path and the head.

#ifndef IELAB_MODEL_HPP_
#define IELAB_MODEL_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ielab/checkpoint.hpp"
#include "ielab/docstream.hpp"
#include "ielab/layout_encoder.hpp"
#include "ielab/stylefuse.hpp"

namespace ielab {

struct ModelSpec {
  EncoderConfig encoder;
  FusionMode fusion = FusionMode::kBaseline;
  // Width of each style table under STYLE_CONCAT. STYLE_SUM always uses the
  // hidden width.
  int style_dim = 64;
  std::vector<StyleFeature> features = {kAllStyleFeatures.begin(), kAllStyleFeatures.end()};
  ImagePathConfig image;
  double head_dropout = 0.3;

  void validate() const;
  std::size_t style_width() const;
  // Input width of the classifier head.
  std::size_t head_width() const;
  bool operator==(const ModelSpec&) const = default;
};

nlohmann::json to_json(const ModelSpec& s);
ModelSpec model_spec_from_json(const nlohmann::json& j);

// Per-step randomness. Encoder and head dropout draw from separate streams so
// that two models differing only in their fusion path see the same encoder
// masks.
struct ForwardNoise {
  Rng encoder;
  Rng head;
  static ForwardNoise from_seed(std::uint64_t seed);
};

class TaggerModel {
 public:
  // Initializes every component from spec.encoder.seed. `style_sizes` gives
  // the vocabulary size per style feature (see StyleVocabulary::sizes).
  TaggerModel(ModelSpec spec, const std::array<int, kNumStyleFeatures>& style_sizes);

  const ModelSpec& spec() const { return spec_; }
  const std::array<int, kNumStyleFeatures>& style_sizes() const { return style_sizes_; }

  std::vector<std::pair<std::string, Tensor*>> named_parameters();
  std::vector<std::pair<std::string, const Tensor*>> named_parameters() const;
  std::vector<Tensor*> parameters();
  std::size_t parameter_count() const;

  // Logits [T x label_count] for one chunk. `rasters` holds the document's
  // page rasters and is only read in IMAGE mode.
  Tensor logits(const ModelInput& chunk, std::span<const Tensor> rasters, bool training,
                ForwardNoise& noise) const;
  // Inference: softmax of the logits, no dropout.
  Tensor probabilities(const ModelInput& chunk, std::span<const Tensor> rasters) const;

  // Fused token representation (input of the head), no dropout.
  Tensor fused(const ModelInput& chunk, std::span<const Tensor> rasters) const;

  EncoderParameters& encoder() { return encoder_; }
  StyleTables& style() { return style_; }
  ImagePathParameters& image() { return image_; }
  ClassifierHead& head() { return head_; }

  std::vector<NamedTensor> export_parameters() const;
  // Throws MismatchError on a missing tensor or a shape difference.
  void load_parameters(std::span<const NamedTensor> tensors);

 private:
  Tensor fuse(const Tensor& encoded, const ModelInput& chunk,
              std::span<const Tensor> rasters) const;

  ModelSpec spec_;
  std::array<int, kNumStyleFeatures> style_sizes_;
  EncoderParameters encoder_;
  StyleTables style_;
  ImagePathParameters image_;
  ClassifierHead head_;
};

}  // namespace ielab

#endif  // IELAB_MODEL_HPP_
