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

// Miniature layout-aware transformer encoder. A token's input embedding is
// the sum of its word embedding, its 1-D position embedding and six 2-D
// embeddings (x1, x2, y1, y2, width, height on the [0,1000] grid). One layer
// norm follows the sum, then a post-norm transformer stack.

#ifndef IELAB_LAYOUT_ENCODER_HPP_
#define IELAB_LAYOUT_ENCODER_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ielab/docstream.hpp"
#include "ielab/rng.hpp"
#include "ielab/tensor.hpp"

namespace ielab {

inline constexpr int kCoordVocab = kCoordMax + 1;

struct EncoderConfig {
  int hidden = 64;
  int layers = 2;
  int heads = 2;
  int ff_dim = 256;
  int max_seq_len = 512;
  int word_vocab = 2;
  int label_count = 1;
  double init_std = 0.02;
  double hidden_dropout = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

nlohmann::json to_json(const EncoderConfig& c);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

struct EncoderLayerParameters {
  Tensor q, q_bias, k, k_bias, v, v_bias, o, o_bias;
  Tensor attn_ln_gamma, attn_ln_beta;
  Tensor ffn_in, ffn_in_bias, ffn_out, ffn_out_bias;
  Tensor ffn_ln_gamma, ffn_ln_beta;
};

struct EncoderParameters {
  Tensor word_table;
  Tensor pos1d_table;
  Tensor x1_table, y1_table, x2_table, y2_table, w_table, h_table;
  Tensor embed_ln_gamma, embed_ln_beta;
  std::vector<EncoderLayerParameters> layers;

  // Stable checkpoint names ("word_table", "pos2d.x1", "layer.0.attn.q", ...).
  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;
};

// Weight tables ~ N(0, init_std^2), biases 0, layer-norm gains 1. Each tensor
// draws from its own stream derived from (seed, name).
EncoderParameters init_parameters(const EncoderConfig& config);

// Sum of the eight embedding terms for every token, [T x hidden].
Tensor embed_tokens(const ModelInput& input, const EncoderParameters& params,
                    const EncoderConfig& config);

// Embedding layer norm, dropout, then the transformer stack. Keys whose mask
// entry is false get zero attention weight. When `attention` is non-null the
// per-layer, per-head attention matrices are appended to it.
Tensor encoder_forward(const Tensor& hidden_in, const std::vector<bool>& mask,
                       const EncoderParameters& params, const EncoderConfig& config,
                       bool training, Rng& rng, std::vector<Tensor>* attention = nullptr);

}  // namespace ielab

#endif  // IELAB_LAYOUT_ENCODER_HPP_
