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

#include "ielab/stylefuse.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ielab/error.hpp"
#include "ielab/ops.hpp"

namespace ielab {

using nlohmann::json;

std::string_view to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::kBaseline: return "BASELINE";
    case FusionMode::kStyleSum: return "STYLE_SUM";
    case FusionMode::kStyleConcat: return "STYLE_CONCAT";
    case FusionMode::kImage: return "IMAGE";
  }
  return "?";
}

FusionMode parse_fusion_mode(std::string_view name) {
  if (name == "BASELINE") return FusionMode::kBaseline;
  if (name == "STYLE_SUM") return FusionMode::kStyleSum;
  if (name == "STYLE_CONCAT") return FusionMode::kStyleConcat;
  if (name == "IMAGE") return FusionMode::kImage;
  throw ConfigError("unknown fusion mode '" + std::string(name) +
                    "' (expected BASELINE, STYLE_SUM, STYLE_CONCAT or IMAGE)");
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

std::string table_name(StyleFeature f) { return "style." + std::string(feature_name(f)); }

void check_style_ids(const Tensor& encoded, const StyleIds& ids, const StyleTables& tables) {
  for (StyleFeature f : tables.features) {
    if (ids[static_cast<std::size_t>(f)].size() != encoded.dim(0)) {
      throw DimensionError("style ids for '" + std::string(feature_name(f)) + "' have length " +
                           std::to_string(ids[static_cast<std::size_t>(f)].size()) + " for " +
                           std::to_string(encoded.dim(0)) + " tokens");
    }
  }
}

}  // namespace

// ---- Style path ------------------------------------------------------------

std::vector<std::pair<std::string, Tensor*>> StyleTables::named() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t i = 0; i < features.size(); ++i) out.emplace_back(table_name(features[i]), &tables[i]);
  return out;
}

StyleTables init_style_tables(std::vector<StyleFeature> features,
                              const std::array<int, kNumStyleFeatures>& vocab_sizes,
                              std::size_t dim, double init_std, std::uint64_t seed) {
  if (dim == 0) throw ConfigError("style tables need a positive dimension");
  std::sort(features.begin(), features.end());
  features.erase(std::unique(features.begin(), features.end()), features.end());
  StyleTables t;
  t.features = std::move(features);
  for (StyleFeature f : t.features) {
    const auto v = static_cast<std::size_t>(vocab_sizes[static_cast<std::size_t>(f)]);
    t.tables.push_back(normal_tensor({v, dim}, init_std, seed, table_name(f)));
  }
  return t;
}

Tensor fuse_style_sum(const Tensor& encoded, const StyleIds& style_ids, const StyleTables& tables) {
  if (encoded.rank() != 2) throw DimensionError("fuse_style_sum: encoder output must be [T x hidden]");
  for (const Tensor& t : tables.tables) {
    if (t.dim(1) != encoded.dim(1)) {
      throw ConfigError("fuse_style_sum: style table width " + std::to_string(t.dim(1)) +
                        " differs from hidden width " + std::to_string(encoded.dim(1)));
    }
  }
  check_style_ids(encoded, style_ids, tables);
  Tensor e = encoded;
  for (std::size_t i = 0; i < tables.features.size(); ++i) {
    e = add(e, embedding_lookup(tables.tables[i],
                                style_ids[static_cast<std::size_t>(tables.features[i])]));
  }
  return e;
}

Tensor fuse_style_concat(const Tensor& encoded, const StyleIds& style_ids,
                         const StyleTables& tables) {
  if (encoded.rank() != 2) {
    throw DimensionError("fuse_style_concat: encoder output must be [T x hidden]");
  }
  check_style_ids(encoded, style_ids, tables);
  std::vector<Tensor> parts;
  parts.reserve(tables.features.size() + 1);
  parts.push_back(encoded);
  for (std::size_t i = 0; i < tables.features.size(); ++i) {
    if (tables.tables[i].dim(1) != tables.dim()) {
      throw DimensionError("fuse_style_concat: style tables must share one width");
    }
    parts.push_back(embedding_lookup(tables.tables[i],
                                     style_ids[static_cast<std::size_t>(tables.features[i])]));
  }
  return concat_cols(parts);
}

// ---- Image path ------------------------------------------------------------

void ImagePathConfig::validate() const {
  if (raster_channels < 1 || raster_height < 1 || raster_width < 1) {
    throw ConfigError("image path: raster dimensions must be >= 1");
  }
  if (backbone_channels.empty()) throw ConfigError("image path: backbone needs at least one stage");
  for (int c : backbone_channels) {
    if (c < 1) throw ConfigError("image path: backbone channels must be >= 1");
  }
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("image path: kernel must be odd");
  if (stride < 1) throw ConfigError("image path: stride must be >= 1");
  if (roi_output < 1 || sampling < 1) throw ConfigError("image path: roi_output and sampling must be >= 1");
}

json to_json(const ImagePathConfig& c) {
  return {{"raster", {c.raster_channels, c.raster_height, c.raster_width}},
          {"backbone_channels", c.backbone_channels},
          {"kernel", c.kernel},
          {"stride", c.stride},
          {"roi_output", c.roi_output},
          {"sampling", c.sampling}};
}

ImagePathConfig image_config_from_json(const json& j) {
  ImagePathConfig c;
  if (j.contains("raster")) {
    const auto r = j.at("raster").get<std::array<int, 3>>();
    c.raster_channels = r[0];
    c.raster_height = r[1];
    c.raster_width = r[2];
  }
  c.backbone_channels = j.value("backbone_channels", c.backbone_channels);
  c.kernel = j.value("kernel", c.kernel);
  c.stride = j.value("stride", c.stride);
  c.roi_output = j.value("roi_output", c.roi_output);
  c.sampling = j.value("sampling", c.sampling);
  c.validate();
  return c;
}

std::vector<std::pair<std::string, Tensor*>> ImagePathParameters::named() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    out.emplace_back("image.backbone." + std::to_string(i), &kernels[i]);
    out.emplace_back("image.backbone." + std::to_string(i) + ".bias", &biases[i]);
  }
  out.emplace_back("image.proj", &proj);
  out.emplace_back("image.proj.bias", &proj_bias);
  return out;
}

ImagePathParameters init_image_path(const ImagePathConfig& cfg, std::size_t hidden,
                                    double init_std, std::uint64_t seed) {
  cfg.validate();
  ImagePathParameters p;
  std::size_t cin = static_cast<std::size_t>(cfg.raster_channels);
  const auto k = static_cast<std::size_t>(cfg.kernel);
  for (std::size_t i = 0; i < cfg.backbone_channels.size(); ++i) {
    const auto cout = static_cast<std::size_t>(cfg.backbone_channels[i]);
    // He-style scale keeps activations alive through the GELU stack.
    const double sd = init_std == 0.0 ? 0.0 : std::sqrt(2.0 / static_cast<double>(cin * k * k));
    p.kernels.push_back(normal_tensor({cout, cin, k, k}, sd, seed, "image.backbone." + std::to_string(i)));
    p.biases.emplace_back(Shape{cout}, 0.0);
    cin = cout;
  }
  p.proj = normal_tensor({static_cast<std::size_t>(cfg.pooled_width()), hidden}, init_std, seed,
                         "image.proj");
  p.proj_bias = Tensor({hidden}, 0.0);
  return p;
}

Tensor backbone_forward(const Tensor& raster, const ImagePathParameters& params,
                        const ImagePathConfig& cfg) {
  const Shape expected = {static_cast<std::size_t>(cfg.raster_channels),
                          static_cast<std::size_t>(cfg.raster_height),
                          static_cast<std::size_t>(cfg.raster_width)};
  if (raster.shape() != expected) {
    throw DimensionError("backbone_forward: raster " + shape_string(raster.shape()) +
                         " does not match configured " + shape_string(expected));
  }
  const auto pad = static_cast<std::size_t>(cfg.kernel / 2);
  Tensor x = raster;
  for (std::size_t i = 0; i < params.kernels.size(); ++i) {
    x = gelu(add_channel_bias(conv2d(x, params.kernels[i], static_cast<std::size_t>(cfg.stride), pad),
                              params.biases[i]));
  }
  return x;
}

// ---- RoIAlign --------------------------------------------------------------

namespace {

struct Tap {
  std::size_t idx[4];
  double w[4];
};

// Bilinear taps for one point; all weights zero when the point is outside.
Tap bilinear_taps(double y, double x, std::size_t h, std::size_t w) {
  Tap t{{0, 0, 0, 0}, {0, 0, 0, 0}};
  if (y < -1.0 || y > static_cast<double>(h) || x < -1.0 || x > static_cast<double>(w)) return t;
  y = std::max(y, 0.0);
  x = std::max(x, 0.0);
  auto y_low = static_cast<std::size_t>(y);
  auto x_low = static_cast<std::size_t>(x);
  std::size_t y_high, x_high;
  if (y_low >= h - 1) {
    y_high = y_low = h - 1;
    y = static_cast<double>(y_low);
  } else {
    y_high = y_low + 1;
  }
  if (x_low >= w - 1) {
    x_high = x_low = w - 1;
    x = static_cast<double>(x_low);
  } else {
    x_high = x_low + 1;
  }
  const double ly = y - static_cast<double>(y_low), lx = x - static_cast<double>(x_low);
  const double hy = 1.0 - ly, hx = 1.0 - lx;
  t.idx[0] = y_low * w + x_low;
  t.idx[1] = y_low * w + x_high;
  t.idx[2] = y_high * w + x_low;
  t.idx[3] = y_high * w + x_high;
  t.w[0] = hy * hx;
  t.w[1] = hy * lx;
  t.w[2] = ly * hx;
  t.w[3] = ly * lx;
  return t;
}

// Taps for every (bin, sample) of one box, bins in row-major order.
std::vector<Tap> roi_taps(const GridBox& box, std::size_t h, std::size_t w, int out_size,
                          int sampling) {
  const double y0 = grid_to_feature(box.y1, h), y1 = grid_to_feature(box.y2, h);
  const double x0 = grid_to_feature(box.x1, w), x1 = grid_to_feature(box.x2, w);
  const double bin_h = (y1 - y0) / out_size, bin_w = (x1 - x0) / out_size;
  std::vector<Tap> taps;
  taps.reserve(static_cast<std::size_t>(out_size * out_size * sampling * sampling));
  for (int by = 0; by < out_size; ++by) {
    for (int bx = 0; bx < out_size; ++bx) {
      for (int sy = 0; sy < sampling; ++sy) {
        const double y = y0 + bin_h * (by + (sy + 0.5) / sampling);
        for (int sx = 0; sx < sampling; ++sx) {
          const double x = x0 + bin_w * (bx + (sx + 0.5) / sampling);
          taps.push_back(bilinear_taps(y, x, h, w));
        }
      }
    }
  }
  return taps;
}

}  // namespace

double bilinear_at(const Tensor& fmap, std::size_t c, double y, double x) {
  const std::size_t h = fmap.dim(1), w = fmap.dim(2);
  const Tap t = bilinear_taps(y, x, h, w);
  const double* base = fmap.data().data() + c * h * w;
  return t.w[0] * base[t.idx[0]] + t.w[1] * base[t.idx[1]] + t.w[2] * base[t.idx[2]] +
         t.w[3] * base[t.idx[3]];
}

Tensor roi_align_rows(std::span<const Tensor> fmaps, std::span<const int> page_of,
                      std::span<const GridBox> boxes, int out_size, int sampling) {
  if (fmaps.empty()) throw DimensionError("roi_align: no feature maps");
  if (page_of.size() != boxes.size() || boxes.empty()) {
    throw DimensionError("roi_align: need one page index per box");
  }
  if (out_size < 1 || sampling < 1) throw ConfigError("roi_align: out_size and sampling must be >= 1");
  const Shape& fshape = fmaps[0].shape();
  if (fshape.size() != 3) throw DimensionError("roi_align: feature map must be [C x h x w]");
  for (const Tensor& f : fmaps) {
    if (f.shape() != fshape) throw DimensionError("roi_align: feature maps differ in shape");
  }
  const std::size_t c = fshape[0], h = fshape[1], w = fshape[2];
  const auto bins = static_cast<std::size_t>(out_size * out_size);
  const auto per_bin = static_cast<std::size_t>(sampling * sampling);
  const std::size_t width = c * bins;
  const double inv = 1.0 / static_cast<double>(per_bin);

  Tensor out(Shape{boxes.size(), width});
  std::vector<std::vector<Tap>> all_taps(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const int pg = page_of[i];
    if (pg < 0 || static_cast<std::size_t>(pg) >= fmaps.size()) {
      throw IndexError("roi_align: box " + std::to_string(i) + " references page " +
                       std::to_string(pg) + " but only " + std::to_string(fmaps.size()) +
                       " feature maps were given");
    }
    all_taps[i] = roi_taps(boxes[i], h, w, out_size, sampling);
    const double* fm = fmaps[static_cast<std::size_t>(pg)].data().data();
    double* row = out.data().data() + i * width;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* base = fm + ch * h * w;
      for (std::size_t b = 0; b < bins; ++b) {
        double acc = 0.0;
        for (std::size_t s = 0; s < per_bin; ++s) {
          const Tap& t = all_taps[i][b * per_bin + s];
          acc += t.w[0] * base[t.idx[0]] + t.w[1] * base[t.idx[1]] + t.w[2] * base[t.idx[2]] +
                 t.w[3] * base[t.idx[3]];
        }
        row[ch * bins + b] = acc * inv;
      }
    }
  }

  Tape* tape = Tape::active();
  if (tape != nullptr &&
      std::any_of(fmaps.begin(), fmaps.end(), [tape](const Tensor& f) { return tape->tracks(f); })) {
    std::vector<const Tensor*> inputs;
    for (const Tensor& f : fmaps) inputs.push_back(&f);
    tape->record(out, inputs,
                 [all_taps = std::move(all_taps), pages = std::vector<int>(page_of.begin(), page_of.end()),
                  c, h, w, bins, per_bin, width, inv](std::span<const double> g, BackwardContext& ctx) {
                   for (std::size_t i = 0; i < pages.size(); ++i) {
                     auto dmap = ctx.input_grad(static_cast<std::size_t>(pages[i]));
                     if (dmap.empty()) continue;
                     const double* gr = g.data() + i * width;
                     for (std::size_t ch = 0; ch < c; ++ch) {
                       double* base = dmap.data() + ch * h * w;
                       for (std::size_t b = 0; b < bins; ++b) {
                         const double gv = gr[ch * bins + b] * inv;
                         for (std::size_t s = 0; s < per_bin; ++s) {
                           const Tap& t = all_taps[i][b * per_bin + s];
                           for (int q = 0; q < 4; ++q) base[t.idx[q]] += t.w[q] * gv;
                         }
                       }
                     }
                   }
                 });
  }
  return out;
}

Tensor roi_align(const Tensor& fmap, const GridBox& box, int out_size, int sampling) {
  const int page = 0;
  Tensor rows = roi_align_rows(std::span<const Tensor>(&fmap, 1), std::span<const int>(&page, 1),
                               std::span<const GridBox>(&box, 1), out_size, sampling);
  return reshape(rows, {fmap.dim(0), static_cast<std::size_t>(out_size),
                        static_cast<std::size_t>(out_size)});
}

Tensor image_embed_and_fuse(const Tensor& encoded, const ModelInput& input,
                            std::span<const Tensor> rasters, const ImagePathParameters& params,
                            const ImagePathConfig& cfg) {
  const std::size_t t = input.size();
  if (encoded.rank() != 2 || encoded.dim(0) != t) {
    throw DimensionError("image_embed_and_fuse: encoder output " + shape_string(encoded.shape()) +
                         " for " + std::to_string(t) + " tokens");
  }
  int max_page = 0;
  for (int p : input.page_ids) max_page = std::max(max_page, p);
  if (static_cast<std::size_t>(max_page) >= rasters.size()) {
    throw IndexError("image_embed_and_fuse: token references page " + std::to_string(max_page) +
                     " but only " + std::to_string(rasters.size()) + " page rasters were given");
  }
  // Only pages referenced by this input go through the backbone.
  std::vector<int> local(static_cast<std::size_t>(max_page) + 1, -1);
  std::vector<Tensor> fmaps;
  for (int p : input.page_ids) {
    if (local[static_cast<std::size_t>(p)] < 0) {
      local[static_cast<std::size_t>(p)] = static_cast<int>(fmaps.size());
      fmaps.push_back(backbone_forward(rasters[static_cast<std::size_t>(p)], params, cfg));
    }
  }
  std::vector<int> page_of(t);
  std::vector<GridBox> boxes(t);
  for (std::size_t i = 0; i < t; ++i) {
    page_of[i] = local[static_cast<std::size_t>(input.page_ids[i])];
    boxes[i] = {static_cast<double>(input.x1_ids[i]), static_cast<double>(input.y1_ids[i]),
                static_cast<double>(input.x2_ids[i]), static_cast<double>(input.y2_ids[i])};
  }
  const Tensor pooled = roi_align_rows(fmaps, page_of, boxes, cfg.roi_output, cfg.sampling);
  return add(encoded, linear(pooled, params.proj, params.proj_bias));
}

// ---- Head ------------------------------------------------------------------

std::vector<std::pair<std::string, Tensor*>> ClassifierHead::named() {
  return {{"head.weight", &weight}, {"head.bias", &bias}};
}

ClassifierHead init_head(std::size_t input_width, std::size_t label_count, double dropout,
                         double init_std, std::uint64_t seed) {
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("head dropout must lie in [0, 1)");
  ClassifierHead h;
  h.weight = normal_tensor({input_width, label_count}, init_std, seed, "head.weight");
  h.bias = Tensor({label_count}, 0.0);
  h.dropout = dropout;
  return h;
}

Tensor head_logits(const Tensor& e, const ClassifierHead& head, bool training, Rng& rng) {
  if (e.rank() != 2 || e.dim(1) != head.input_width()) {
    throw ConfigError("classifier head expects width " + std::to_string(head.input_width()) +
                      ", got " + shape_string(e.shape()) + " (fusion wiring mismatch)");
  }
  return linear(dropout(e, head.dropout, rng, training), head.weight, head.bias);
}

Tensor classify(const Tensor& e, const ClassifierHead& head, bool training, Rng& rng) {
  return softmax_rows(head_logits(e, head, training, rng));
}

}  // namespace ielab
