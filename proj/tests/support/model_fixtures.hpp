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

#ifndef IELAB_TESTS_MODEL_FIXTURES_HPP_
#define IELAB_TESTS_MODEL_FIXTURES_HPP_

#include <random>
#include <vector>

#include "ielab/model.hpp"
#include "ielab/ops.hpp"
#include "test_support.hpp"

namespace ielab::testing {

inline constexpr std::array<int, kNumStyleFeatures> kTinyStyleSizes = {2, 4, 3, 2, 2};

// hidden 8, 2 layers, small vocabularies and a 16 x 16 raster.
inline ModelSpec tiny_spec(FusionMode mode) {
  ModelSpec s;
  s.fusion = mode;
  s.encoder.hidden = 8;
  s.encoder.layers = 2;
  s.encoder.heads = 2;
  s.encoder.ff_dim = 16;
  s.encoder.max_seq_len = 8;
  s.encoder.word_vocab = 12;
  s.encoder.label_count = 5;
  s.encoder.init_std = 0.5;
  s.encoder.seed = 21;
  s.style_dim = 3;
  s.image.raster_height = 16;
  s.image.raster_width = 16;
  s.image.backbone_channels = {2, 3};
  return s;
}

// A small random architecture for parameter accounting: heads divide the
// hidden width, a random non-empty feature subset and a random backbone.
inline ModelSpec random_spec(FusionMode mode, std::mt19937_64& gen) {
  auto draw = [&gen](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); };
  ModelSpec s;
  s.fusion = mode;
  s.encoder.heads = draw(1, 3);
  s.encoder.hidden = s.encoder.heads * draw(1, 6);
  s.encoder.layers = draw(1, 3);
  s.encoder.ff_dim = draw(1, 20);
  s.encoder.max_seq_len = draw(1, 30);
  s.encoder.word_vocab = draw(2, 40);
  s.encoder.label_count = draw(1, 9);
  s.style_dim = draw(1, 7);
  s.features.clear();
  for (StyleFeature f : kAllStyleFeatures) {
    if (gen() % 2) s.features.push_back(f);
  }
  if (s.features.empty()) s.features.push_back(StyleFeature::kColor);
  s.image.raster_height = 8 * draw(1, 3);
  s.image.raster_width = 8 * draw(1, 3);
  s.image.backbone_channels.assign(static_cast<std::size_t>(draw(1, 3)), 0);
  for (int& c : s.image.backbone_channels) c = draw(1, 4);
  s.image.roi_output = draw(1, 3);
  return s;
}

// Central-difference check of the masked cross-entropy of the full model on
// one T-token input, dropout on with fixed masks.
inline GradCheckResult model_gradcheck(FusionMode mode, std::size_t T = 4,
                                       std::uint64_t seed = 3) {
  const ModelSpec spec = tiny_spec(mode);
  TaggerModel model(spec, kTinyStyleSizes);
  std::mt19937_64 gen(seed);
  ModelInput in = random_input(T, spec.encoder.word_vocab, spec.encoder.label_count,
                               kTinyStyleSizes, gen, 2);
  in.mask[1] = false;
  std::vector<Tensor> rasters;
  for (int p = 0; p < 2; ++p) rasters.push_back(random_tensor({1, 16, 16}, gen, 0.0, 1.0));
  auto f = [&] {
    ForwardNoise noise = ForwardNoise::from_seed(seed);
    const Tensor logits = model.logits(in, rasters, true, noise);
    return cross_entropy_masked(logits, in.label_ids, in.mask);
  };
  return gradcheck(model.named_parameters(), f);
}

}  // namespace ielab::testing

#endif  // IELAB_TESTS_MODEL_FIXTURES_HPP_
