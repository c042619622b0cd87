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

#include "ielab/layout_encoder.hpp"

#include <cmath>
#include <random>

#include "ielab/error.hpp"
#include "ielab/ops.hpp"

namespace ielab {

using nlohmann::json;

void EncoderConfig::validate() const {
  if (hidden < 1 || layers < 0 || heads < 1 || ff_dim < 1 || word_vocab < 1 || label_count < 1) {
    throw ConfigError("encoder: hidden, heads, ff_dim, word_vocab and label_count must be >= 1");
  }
  if (hidden % heads != 0) {
    throw ConfigError("encoder: hidden (" + std::to_string(hidden) +
                      ") is not divisible by heads (" + std::to_string(heads) + ")");
  }
  if (max_seq_len < 1) throw ConfigError("encoder: max_seq_len must be >= 1");
  if (init_std < 0.0) throw ConfigError("encoder: init_std must be >= 0");
  if (!(hidden_dropout >= 0.0 && hidden_dropout < 1.0)) {
    throw ConfigError("encoder: hidden_dropout must lie in [0, 1)");
  }
}

json to_json(const EncoderConfig& c) {
  return {{"hidden", c.hidden},         {"layers", c.layers},
          {"heads", c.heads},           {"ff_dim", c.ff_dim},
          {"max_seq_len", c.max_seq_len}, {"word_vocab", c.word_vocab},
          {"label_count", c.label_count}, {"init_std", c.init_std},
          {"hidden_dropout", c.hidden_dropout}, {"seed", c.seed}};
}

EncoderConfig encoder_config_from_json(const json& j) {
  EncoderConfig c;
  c.hidden = j.value("hidden", c.hidden);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.ff_dim = j.value("ff_dim", 4 * c.hidden);
  c.max_seq_len = j.value("max_seq_len", c.max_seq_len);
  c.word_vocab = j.value("word_vocab", c.word_vocab);
  c.label_count = j.value("label_count", c.label_count);
  c.init_std = j.value("init_std", c.init_std);
  c.hidden_dropout = j.value("hidden_dropout", c.hidden_dropout);
  c.seed = j.value("seed", c.seed);
  return c;
}

namespace {

Tensor normal_tensor(Shape shape, double stddev, std::uint64_t seed, const std::string& name) {
  Tensor t(std::move(shape), 0.0);
  if (stddev == 0.0) return t;
  Rng rng = make_rng(seed, "init." + name);
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> EncoderParameters::named() {
  std::vector<std::pair<std::string, Tensor*>> out = {
      {"word_table", &word_table},   {"pos1d", &pos1d_table},     {"pos2d.x1", &x1_table},
      {"pos2d.y1", &y1_table},       {"pos2d.x2", &x2_table},     {"pos2d.y2", &y2_table},
      {"pos2d.w", &w_table},         {"pos2d.h", &h_table},       {"embed.ln.gamma", &embed_ln_gamma},
      {"embed.ln.beta", &embed_ln_beta}};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string p = "layer." + std::to_string(i) + ".";
    auto& l = layers[i];
    out.insert(out.end(), {{p + "attn.q", &l.q},
                           {p + "attn.q.bias", &l.q_bias},
                           {p + "attn.k", &l.k},
                           {p + "attn.k.bias", &l.k_bias},
                           {p + "attn.v", &l.v},
                           {p + "attn.v.bias", &l.v_bias},
                           {p + "attn.o", &l.o},
                           {p + "attn.o.bias", &l.o_bias},
                           {p + "attn.ln.gamma", &l.attn_ln_gamma},
                           {p + "attn.ln.beta", &l.attn_ln_beta},
                           {p + "ffn.in", &l.ffn_in},
                           {p + "ffn.in.bias", &l.ffn_in_bias},
                           {p + "ffn.out", &l.ffn_out},
                           {p + "ffn.out.bias", &l.ffn_out_bias},
                           {p + "ffn.ln.gamma", &l.ffn_ln_gamma},
                           {p + "ffn.ln.beta", &l.ffn_ln_beta}});
  }
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> EncoderParameters::named() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : const_cast<EncoderParameters*>(this)->named()) out.emplace_back(name, t);
  return out;
}

EncoderParameters init_parameters(const EncoderConfig& config) {
  config.validate();
  const std::size_t h = static_cast<std::size_t>(config.hidden);
  const std::size_t ff = static_cast<std::size_t>(config.ff_dim);
  const double sd = config.init_std;
  const std::uint64_t seed = config.seed;
  EncoderParameters p;
  p.word_table = normal_tensor({static_cast<std::size_t>(config.word_vocab), h}, sd, seed, "word_table");
  p.pos1d_table = normal_tensor({static_cast<std::size_t>(config.max_seq_len), h}, sd, seed, "pos1d");
  p.x1_table = normal_tensor({kCoordVocab, h}, sd, seed, "pos2d.x1");
  p.y1_table = normal_tensor({kCoordVocab, h}, sd, seed, "pos2d.y1");
  p.x2_table = normal_tensor({kCoordVocab, h}, sd, seed, "pos2d.x2");
  p.y2_table = normal_tensor({kCoordVocab, h}, sd, seed, "pos2d.y2");
  p.w_table = normal_tensor({kCoordVocab, h}, sd, seed, "pos2d.w");
  p.h_table = normal_tensor({kCoordVocab, h}, sd, seed, "pos2d.h");
  p.embed_ln_gamma = Tensor({h}, 1.0);
  p.embed_ln_beta = Tensor({h}, 0.0);
  for (int i = 0; i < config.layers; ++i) {
    const std::string n = "layer." + std::to_string(i) + ".";
    EncoderLayerParameters l;
    l.q = normal_tensor({h, h}, sd, seed, n + "attn.q");
    l.k = normal_tensor({h, h}, sd, seed, n + "attn.k");
    l.v = normal_tensor({h, h}, sd, seed, n + "attn.v");
    l.o = normal_tensor({h, h}, sd, seed, n + "attn.o");
    l.q_bias = Tensor({h}, 0.0);
    l.k_bias = Tensor({h}, 0.0);
    l.v_bias = Tensor({h}, 0.0);
    l.o_bias = Tensor({h}, 0.0);
    l.attn_ln_gamma = Tensor({h}, 1.0);
    l.attn_ln_beta = Tensor({h}, 0.0);
    l.ffn_in = normal_tensor({h, ff}, sd, seed, n + "ffn.in");
    l.ffn_in_bias = Tensor({ff}, 0.0);
    l.ffn_out = normal_tensor({ff, h}, sd, seed, n + "ffn.out");
    l.ffn_out_bias = Tensor({h}, 0.0);
    l.ffn_ln_gamma = Tensor({h}, 1.0);
    l.ffn_ln_beta = Tensor({h}, 0.0);
    p.layers.push_back(std::move(l));
  }
  return p;
}

Tensor embed_tokens(const ModelInput& input, const EncoderParameters& params,
                    const EncoderConfig& config) {
  const std::size_t t = input.size();
  if (t == 0) throw ContractError("embed_tokens: empty input");
  if (t > static_cast<std::size_t>(config.max_seq_len)) {
    throw ContractError("embed_tokens: sequence of " + std::to_string(t) +
                        " tokens exceeds max_seq_len " + std::to_string(config.max_seq_len) +
                        "; chunk the document first");
  }
  Tensor e = embedding_lookup(params.word_table, input.word_ids);
  e = add(e, embedding_lookup(params.pos1d_table, input.pos1d_ids));
  e = add(e, embedding_lookup(params.x1_table, input.x1_ids));
  e = add(e, embedding_lookup(params.x2_table, input.x2_ids));
  e = add(e, embedding_lookup(params.y1_table, input.y1_ids));
  e = add(e, embedding_lookup(params.y2_table, input.y2_ids));
  e = add(e, embedding_lookup(params.w_table, input.w_ids));
  e = add(e, embedding_lookup(params.h_table, input.h_ids));
  return e;
}

namespace {

Tensor self_attention(const Tensor& x, const std::vector<bool>& mask,
                      const EncoderLayerParameters& l, const EncoderConfig& config,
                      std::vector<Tensor>* attention) {
  const std::size_t h = static_cast<std::size_t>(config.hidden);
  const std::size_t dh = h / static_cast<std::size_t>(config.heads);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const Tensor q = linear(x, l.q, l.q_bias);
  const Tensor k = linear(x, l.k, l.k_bias);
  const Tensor v = linear(x, l.v, l.v_bias);
  std::vector<Tensor> heads;
  heads.reserve(static_cast<std::size_t>(config.heads));
  for (std::size_t hd = 0; hd < static_cast<std::size_t>(config.heads); ++hd) {
    const std::size_t b = hd * dh, e = b + dh;
    const Tensor qh = config.heads == 1 ? q : slice_cols(q, b, e);
    const Tensor kh = config.heads == 1 ? k : slice_cols(k, b, e);
    const Tensor vh = config.heads == 1 ? v : slice_cols(v, b, e);
    const Tensor probs = softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt), mask);
    if (attention) attention->push_back(probs.detach());
    heads.push_back(matmul(probs, vh));
  }
  const Tensor ctx = heads.size() == 1 ? heads[0] : concat_cols(heads);
  return linear(ctx, l.o, l.o_bias);
}

}  // namespace

Tensor encoder_forward(const Tensor& hidden_in, const std::vector<bool>& mask,
                       const EncoderParameters& params, const EncoderConfig& config,
                       bool training, Rng& rng, std::vector<Tensor>* attention) {
  if (hidden_in.rank() != 2 || hidden_in.dim(1) != static_cast<std::size_t>(config.hidden)) {
    throw DimensionError("encoder_forward: expected [T x " + std::to_string(config.hidden) +
                         "] input, got " + shape_string(hidden_in.shape()));
  }
  if (mask.size() != hidden_in.dim(0)) {
    throw DimensionError("encoder_forward: mask length " + std::to_string(mask.size()) +
                         " for " + std::to_string(hidden_in.dim(0)) + " tokens");
  }
  const double p = config.hidden_dropout;
  Tensor x = layer_norm(hidden_in, params.embed_ln_gamma, params.embed_ln_beta);
  x = dropout(x, p, rng, training);
  for (const auto& l : params.layers) {
    Tensor a = dropout(self_attention(x, mask, l, config, attention), p, rng, training);
    x = layer_norm(add(x, a), l.attn_ln_gamma, l.attn_ln_beta);
    Tensor f = linear(gelu(linear(x, l.ffn_in, l.ffn_in_bias)), l.ffn_out, l.ffn_out_bias);
    f = dropout(f, p, rng, training);
    x = layer_norm(add(x, f), l.ffn_ln_gamma, l.ffn_ln_beta);
  }
  return x;
}

}  // namespace ielab
