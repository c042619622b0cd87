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

#include "ielab/model.hpp"

#include <algorithm>
#include <map>

#include "ielab/error.hpp"
#include "ielab/ops.hpp"

namespace ielab {

using nlohmann::json;

void ModelSpec::validate() const {
  encoder.validate();
  if (uses_style(fusion)) {
    if (features.empty()) {
      throw ConfigError("style fusion needs at least one style feature; use BASELINE for none");
    }
    std::vector<StyleFeature> sorted = features;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ConfigError("style feature listed twice");
    }
    if (sorted != features) throw ConfigError("style features must follow the canonical order");
  }
  if (fusion == FusionMode::kStyleConcat && style_dim < 1) {
    throw ConfigError("style_dim must be >= 1");
  }
  if (fusion == FusionMode::kImage) image.validate();
  if (!(head_dropout >= 0.0 && head_dropout < 1.0)) {
    throw ConfigError("head_dropout must lie in [0, 1)");
  }
}

std::size_t ModelSpec::style_width() const {
  return fusion == FusionMode::kStyleSum ? static_cast<std::size_t>(encoder.hidden)
                                         : static_cast<std::size_t>(style_dim);
}

std::size_t ModelSpec::head_width() const {
  const auto h = static_cast<std::size_t>(encoder.hidden);
  if (fusion == FusionMode::kStyleConcat) return h + features.size() * style_width();
  return h;
}

json to_json(const ModelSpec& s) {
  json features = json::array();
  for (StyleFeature f : s.features) features.push_back(std::string(feature_name(f)));
  return {{"encoder", to_json(s.encoder)},
          {"fusion", std::string(to_string(s.fusion))},
          {"style_dim", s.style_dim},
          {"features", features},
          {"image", to_json(s.image)},
          {"head_dropout", s.head_dropout}};
}

ModelSpec model_spec_from_json(const json& j) {
  ModelSpec s;
  if (j.contains("encoder")) s.encoder = encoder_config_from_json(j.at("encoder"));
  if (j.contains("fusion")) s.fusion = parse_fusion_mode(j.at("fusion").get<std::string>());
  s.style_dim = j.value("style_dim", s.style_dim);
  if (j.contains("features")) {
    s.features.clear();
    for (const auto& f : j.at("features")) s.features.push_back(parse_feature(f.get<std::string>()));
    std::sort(s.features.begin(), s.features.end());
  }
  if (j.contains("image")) s.image = image_config_from_json(j.at("image"));
  s.head_dropout = j.value("head_dropout", s.head_dropout);
  return s;
}

ForwardNoise ForwardNoise::from_seed(std::uint64_t seed) {
  return {make_rng(seed, "dropout.encoder"), make_rng(seed, "dropout.head")};
}

TaggerModel::TaggerModel(ModelSpec spec, const std::array<int, kNumStyleFeatures>& style_sizes)
    : spec_(std::move(spec)), style_sizes_(style_sizes) {
  spec_.validate();
  const std::uint64_t seed = spec_.encoder.seed;
  encoder_ = init_parameters(spec_.encoder);
  if (uses_style(spec_.fusion)) {
    style_ = init_style_tables(spec_.features, style_sizes_, spec_.style_width(),
                               spec_.encoder.init_std, seed);
  }
  if (spec_.fusion == FusionMode::kImage) {
    image_ = init_image_path(spec_.image, static_cast<std::size_t>(spec_.encoder.hidden),
                             spec_.encoder.init_std, seed);
  }
  head_ = init_head(spec_.head_width(), static_cast<std::size_t>(spec_.encoder.label_count),
                    spec_.head_dropout, spec_.encoder.init_std, seed);
}

std::vector<std::pair<std::string, Tensor*>> TaggerModel::named_parameters() {
  auto out = encoder_.named();
  if (uses_style(spec_.fusion)) {
    for (auto& p : style_.named()) out.push_back(p);
  }
  if (spec_.fusion == FusionMode::kImage) {
    for (auto& p : image_.named()) out.push_back(p);
  }
  for (auto& p : head_.named()) out.push_back(p);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> TaggerModel::named_parameters() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [n, t] : const_cast<TaggerModel*>(this)->named_parameters()) out.emplace_back(n, t);
  return out;
}

std::vector<Tensor*> TaggerModel::parameters() {
  std::vector<Tensor*> out;
  for (auto& [n, t] : named_parameters()) out.push_back(t);
  return out;
}

std::size_t TaggerModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named_parameters()) n += t->size();
  return n;
}

Tensor TaggerModel::fuse(const Tensor& encoded, const ModelInput& chunk,
                         std::span<const Tensor> rasters) const {
  switch (spec_.fusion) {
    case FusionMode::kBaseline: return encoded;
    case FusionMode::kStyleSum: return fuse_style_sum(encoded, chunk.style_ids, style_);
    case FusionMode::kStyleConcat: return fuse_style_concat(encoded, chunk.style_ids, style_);
    case FusionMode::kImage:
      return image_embed_and_fuse(encoded, chunk, rasters, image_, spec_.image);
  }
  return encoded;
}

Tensor TaggerModel::logits(const ModelInput& chunk, std::span<const Tensor> rasters,
                           bool training, ForwardNoise& noise) const {
  const Tensor emb = embed_tokens(chunk, encoder_, spec_.encoder);
  const Tensor encoded = encoder_forward(emb, chunk.mask, encoder_, spec_.encoder, training,
                                         noise.encoder);
  return head_logits(fuse(encoded, chunk, rasters), head_, training, noise.head);
}

Tensor TaggerModel::probabilities(const ModelInput& chunk, std::span<const Tensor> rasters) const {
  ForwardNoise noise = ForwardNoise::from_seed(0);
  return softmax_rows(logits(chunk, rasters, false, noise));
}

Tensor TaggerModel::fused(const ModelInput& chunk, std::span<const Tensor> rasters) const {
  Rng unused(0);
  const Tensor emb = embed_tokens(chunk, encoder_, spec_.encoder);
  return fuse(encoder_forward(emb, chunk.mask, encoder_, spec_.encoder, false, unused), chunk,
              rasters);
}

std::vector<NamedTensor> TaggerModel::export_parameters() const {
  std::vector<NamedTensor> out;
  for (const auto& [name, t] : named_parameters()) out.push_back({name, t->detach()});
  return out;
}

void TaggerModel::load_parameters(std::span<const NamedTensor> tensors) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& nt : tensors) by_name[nt.name] = &nt.value;
  for (auto& [name, t] : named_parameters()) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw MismatchError("checkpoint lacks parameter '" + name + "'");
    if (it->second->shape() != t->shape()) {
      throw MismatchError("parameter '" + name + "' has shape " +
                          shape_string(it->second->shape()) + " in the checkpoint but " +
                          shape_string(t->shape()) + " in the model");
    }
    *t = it->second->detach();
  }
  if (by_name.size() != named_parameters().size()) {
    throw MismatchError("checkpoint holds " + std::to_string(by_name.size()) +
                        " tensors but the model has " +
                        std::to_string(named_parameters().size()) + " parameters");
  }
}

}  // namespace ielab
