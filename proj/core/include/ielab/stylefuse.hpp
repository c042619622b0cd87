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

// Token representation enrichment applied at the encoder output.
//
// Style path: one embedding table per bucketed style attribute. The rows for
// a token are either added to its encoder output (all tables hidden-wide) or
// concatenated after it (tables of a free width d).
//
// Image path: a small strided conv backbone turns a page raster into a
// feature map; RoIAlign pools a fixed r x r grid over each token box; a
// linear projection maps the pooled features to the hidden width and the
// result is added to the encoder output.

#ifndef IELAB_STYLEFUSE_HPP_
#define IELAB_STYLEFUSE_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ielab/docstream.hpp"
#include "ielab/rng.hpp"
#include "ielab/tensor.hpp"

namespace ielab {

enum class FusionMode { kBaseline, kStyleSum, kStyleConcat, kImage };

std::string_view to_string(FusionMode mode);
// "BASELINE", "STYLE_SUM", "STYLE_CONCAT", "IMAGE".
FusionMode parse_fusion_mode(std::string_view name);
inline bool uses_style(FusionMode m) {
  return m == FusionMode::kStyleSum || m == FusionMode::kStyleConcat;
}

using StyleIds = std::array<std::vector<int>, kNumStyleFeatures>;

struct StyleTables {
  std::vector<StyleFeature> features;  // kept in the canonical feature order
  std::vector<Tensor> tables;          // tables[i] is V x dim for features[i]

  std::size_t dim() const { return tables.empty() ? 0 : tables.front().dim(1); }
  std::vector<std::pair<std::string, Tensor*>> named();
};

StyleTables init_style_tables(std::vector<StyleFeature> features,
                              const std::array<int, kNumStyleFeatures>& vocab_sizes,
                              std::size_t dim, double init_std, std::uint64_t seed);

// e_i = L_i + sum over tables of table[style_id].
Tensor fuse_style_sum(const Tensor& encoded, const StyleIds& style_ids, const StyleTables& tables);
// e_i = [L_i, row_1, ..., row_M] in table order.
Tensor fuse_style_concat(const Tensor& encoded, const StyleIds& style_ids,
                         const StyleTables& tables);

// ---- Image path ------------------------------------------------------------

struct ImagePathConfig {
  int raster_channels = 1;
  int raster_height = 128;
  int raster_width = 128;
  std::vector<int> backbone_channels = {8, 16, 32};
  int kernel = 3;
  int stride = 2;
  int roi_output = 3;
  int sampling = 2;

  int feature_channels() const { return backbone_channels.back(); }
  int pooled_width() const { return feature_channels() * roi_output * roi_output; }
  void validate() const;
  bool operator==(const ImagePathConfig&) const = default;
};

nlohmann::json to_json(const ImagePathConfig& c);
ImagePathConfig image_config_from_json(const nlohmann::json& j);

struct ImagePathParameters {
  std::vector<Tensor> kernels;  // C_out x C_in x k x k
  std::vector<Tensor> biases;   // C_out
  Tensor proj;                  // pooled_width x hidden
  Tensor proj_bias;             // hidden

  std::vector<std::pair<std::string, Tensor*>> named();
};

ImagePathParameters init_image_path(const ImagePathConfig& cfg, std::size_t hidden,
                                    double init_std, std::uint64_t seed);

// conv -> bias -> GELU per stage; each stride-2 stage halves H and W (ceil).
Tensor backbone_forward(const Tensor& raster, const ImagePathParameters& params,
                        const ImagePathConfig& cfg);

// Box corners on the [0, 1000] page grid.
struct GridBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
};

// Continuous feature-map coordinate of a grid coordinate; pixel i covers
// [i, i+1) and its value sits at its centre.
inline double grid_to_feature(double v, std::size_t extent) {
  return v * static_cast<double>(extent) / 1000.0 - 0.5;
}

// Bilinear read of channel `c` of `fmap` at (y, x) in feature coordinates.
// Points farther than one pixel outside the map read 0; points within that
// margin clamp to the border.
double bilinear_at(const Tensor& fmap, std::size_t c, double y, double x);

// Pools `fmap` [C x h x w] over `box` into [C x r x r]. Each bin averages
// sampling x sampling bilinear reads at regular interior offsets.
Tensor roi_align(const Tensor& fmap, const GridBox& box, int out_size = 3, int sampling = 2);

// Batched form: token i reads fmaps[page_of[i]]; returns [n x C*r*r].
Tensor roi_align_rows(std::span<const Tensor> fmaps, std::span<const int> page_of,
                      std::span<const GridBox> boxes, int out_size, int sampling);

// e_i = L_i + proj(flatten(RoIAlign(backbone(raster[page_i]), box_i))).
// `rasters` holds one [C x H x W] raster per page of the document.
Tensor image_embed_and_fuse(const Tensor& encoded, const ModelInput& input,
                            std::span<const Tensor> rasters, const ImagePathParameters& params,
                            const ImagePathConfig& cfg);

// ---- Classification head ---------------------------------------------------

struct ClassifierHead {
  Tensor weight;  // D_in x label_count
  Tensor bias;    // label_count
  double dropout = 0.3;

  std::size_t input_width() const { return weight.dim(0); }
  std::vector<std::pair<std::string, Tensor*>> named();
};

ClassifierHead init_head(std::size_t input_width, std::size_t label_count, double dropout,
                         double init_std, std::uint64_t seed);

// dropout (training only) -> linear. Width mismatch is a ConfigError.
Tensor head_logits(const Tensor& e, const ClassifierHead& head, bool training, Rng& rng);
// softmax(head_logits(...)).
Tensor classify(const Tensor& e, const ClassifierHead& head, bool training, Rng& rng);

}  // namespace ielab

#endif  // IELAB_STYLEFUSE_HPP_
