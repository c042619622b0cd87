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

// Seeded generator of labeled key/value documents with controllable
// style-label correlations, plus page rasterization.
//
// A document is a title, a sequence of "key value" field lines and filler
// lines on a 1000 x 1000 page. Entity fields appear in a fixed per-template
// order; distractor fields carry values of the same types under O labels.
// With probability p_generic_key a field uses a key shared by entity and
// distractor fields, so text and position alone cannot always tell them
// apart. Style attributes are then drawn per template:
//
//   TRADECONF    entity tokens bold (p_bold_entity), amounts in tables
//                (p_table_amount)
//   FEESCHEDULE  names in a larger font (p_largefont_name), margins and
//                rates in tables (p_table_amount)
//   INVOICE      totals in color (p_color_total), amounts in tables
//                (p_table_amount)
//
// Every other token draws each attribute with probability `noise`. Geometry
// never depends on style.

#ifndef IELAB_SYNTHDOCS_HPP_
#define IELAB_SYNTHDOCS_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ielab/docstream.hpp"
#include "ielab/tensor.hpp"

namespace ielab {

enum class DocTemplate { kTradeConf, kFeeSchedule, kInvoice };

std::string_view to_string(DocTemplate t);
DocTemplate parse_template(std::string_view name);

// Entity classes of a template, sorted.
std::vector<std::string> template_classes(DocTemplate t);

struct GeneratorConfig {
  DocTemplate tmpl = DocTemplate::kTradeConf;
  int n_docs = 100;
  std::array<int, 2> tokens_per_doc = {36, 56};
  double p_bold_entity = 0.9;
  double p_table_amount = 0.9;
  double p_largefont_name = 0.9;
  double p_color_total = 0.9;
  double noise = 0.05;
  // Share of fields introduced by a key that entity and distractor fields
  // have in common.
  double p_generic_key = 0.5;
  // Probability that each template field is present in a document.
  double p_field = 0.75;
  std::array<int, 2> distractors = {3, 5};
  int filler_words = 200;
  int raster_size = 128;
  std::uint64_t seed = 0;

  void validate() const;
  // Minimum token count the template needs (title plus three fields).
  int min_tokens() const;
};

nlohmann::json to_json(const GeneratorConfig& c);
GeneratorConfig generator_config_from_json(const nlohmann::json& j);

// Sets every correlation probability to `rate` (and the noise rate too), so
// no style attribute depends on the label.
GeneratorConfig label_independent(GeneratorConfig cfg, double rate);

// Document i depends only on (seed, i).
std::vector<DocumentRecord> generate_corpus(const GeneratorConfig& cfg);
DocumentRecord generate_document(const GeneratorConfig& cfg, int index);

// ---- Rasters ---------------------------------------------------------------

struct PageRaster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, 255 = white

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y * width + x)]; }
  bool operator==(const PageRaster&) const = default;
};

inline constexpr std::uint8_t kFillBold = 40;
inline constexpr std::uint8_t kFillRegular = 140;
inline constexpr std::uint8_t kColorLift = 40;  // added to the fill of colored tokens
inline constexpr std::uint8_t kBorder = 0;

// Pixel rectangle [x0, x1] x [y0, y1] (inclusive) covering a grid box.
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};
PixelRect pixel_rect(const BBox& grid_box, int width, int height);

// One raster per page. Boxes become filled rectangles; bold fills are darker,
// colored fills lighter, and table tokens get a one-pixel border.
std::vector<PageRaster> render_pages(const DocumentRecord& doc, int size = 128);

std::string encode_pgm(const PageRaster& r);
PageRaster decode_pgm(std::string_view bytes);
void write_pgm(const std::filesystem::path& path, const PageRaster& r);
PageRaster read_pgm(const std::filesystem::path& path);

// [1 x H x W] tensor of ink density 1 - v/255, so white pages are zero.
Tensor raster_tensor(const PageRaster& r);

// Rasters named <doc_id>.page<k>.pgm in `dir`.
std::filesystem::path raster_path(const std::filesystem::path& dir, const std::string& doc_id,
                                  int page);

// ---- Summary ---------------------------------------------------------------

struct CorpusSummary {
  std::size_t documents = 0;
  std::size_t tokens = 0;
  std::map<std::string, std::size_t> labels;
  std::map<std::string, std::size_t> fonts;
  std::size_t bold = 0, in_table = 0, colored = 0, large_font = 0;
  // Realized correlation rates: numerator and denominator per rate name.
  std::map<std::string, std::array<std::size_t, 2>> rates;
  bool boxes_in_range = true;

  double rate(const std::string& name) const;
  nlohmann::json to_json() const;
};

CorpusSummary corpus_summary(std::span<const DocumentRecord> docs, DocTemplate t);

}  // namespace ielab

#endif  // IELAB_SYNTHDOCS_HPP_
