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

// Document model for natively parsed PDFs: tokens with geometry and style
// attributes, JSONL ingestion, coordinate quantization, style bucketing and
// vocabulary construction.

#ifndef IELAB_DOCSTREAM_HPP_
#define IELAB_DOCSTREAM_HPP_

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace ielab {

struct BBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  bool operator==(const BBox&) const = default;
};

struct Rgb {
  int r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

struct TokenRecord {
  std::string text;
  int page = 0;
  BBox bbox;
  bool bold = false;
  std::string font;
  double font_size = 10.0;
  bool in_table = false;
  Rgb color;
  std::string label = "O";
  bool operator==(const TokenRecord&) const = default;
};

struct PageSize {
  double width = 1000.0;
  double height = 1000.0;
  bool operator==(const PageSize&) const = default;
};

struct DocumentRecord {
  std::string id;
  std::vector<PageSize> pages;
  std::vector<TokenRecord> tokens;
  bool operator==(const DocumentRecord&) const = default;
};

bool is_valid_label(std::string_view label);

// Throws ValidationError naming the offending field and token index.
void validate_document(const DocumentRecord& doc);

// One document object per line; blank lines are skipped. Throws ParseError
// with the 1-based line number, or ValidationError.
std::vector<DocumentRecord> parse_documents(std::string_view jsonl);
std::string serialize_documents(std::span<const DocumentRecord> docs);

nlohmann::json document_to_json(const DocumentRecord& doc);
DocumentRecord document_from_json(const nlohmann::json& j);

std::vector<DocumentRecord> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, std::span<const DocumentRecord> docs);

// Box quantized to the [0, 1000] grid plus width and height.
struct QuantizedBox {
  int x1 = 0, y1 = 0, x2 = 0, y2 = 0, w = 0, h = 0;
  bool operator==(const QuantizedBox&) const = default;
};

inline constexpr int kCoordMax = 1000;

QuantizedBox normalize_bbox(const BBox& box, const PageSize& page);

// ---- Style attributes ------------------------------------------------------

enum class StyleFeature { kBold = 0, kFont = 1, kFontSize = 2, kInTable = 3, kColor = 4 };

inline constexpr std::size_t kNumStyleFeatures = 5;
inline constexpr std::array<StyleFeature, kNumStyleFeatures> kAllStyleFeatures = {
    StyleFeature::kBold, StyleFeature::kFont, StyleFeature::kFontSize, StyleFeature::kInTable,
    StyleFeature::kColor};

std::string_view feature_name(StyleFeature f);
// Accepts "bold", "font", "fontSize", "inTable", "color" (and snake_case
// spellings). Throws ConfigError otherwise.
StyleFeature parse_feature(std::string_view name);

struct BucketingConfig {
  // A color is BLACK when its largest channel is below this value.
  int black_max_channel = 64;
  // Cluster bounds on font_size / document median: [0,b0[, [b0,b1], ]b1,inf[.
  std::array<double, 2> fontsize_bounds = {1.2, 2.0};
  int font_top_k = 8;

  void validate() const;
};

nlohmann::json to_json(const BucketingConfig& c);
BucketingConfig bucketing_from_json(const nlohmann::json& j);

struct DocumentStyleStats {
  double median_font_size = 0.0;
  std::map<std::string, std::size_t> font_counts;
};

// Lower median for an even token count.
DocumentStyleStats document_style_stats(const DocumentRecord& doc);

inline constexpr int kColorBlack = 0;
inline constexpr int kColorNotBlack = 1;
inline constexpr int kFontOther = 0;

struct StyleVocabulary {
  // fonts[i] has bucket index i + 1; index 0 is OTHER.
  std::vector<std::string> fonts;
  int font_top_k = 8;

  int font_index(const std::string& font) const;
  int size(StyleFeature f) const;
  std::array<int, kNumStyleFeatures> sizes() const;
};

using StyleBuckets = std::array<int, kNumStyleFeatures>;

int color_bucket(const Rgb& c, const BucketingConfig& cfg);
int fontsize_bucket(double ratio, const BucketingConfig& cfg);
StyleBuckets bucket_styles(const TokenRecord& token, const DocumentStyleStats& stats,
                           const BucketingConfig& cfg, const StyleVocabulary& vocab);

// ---- Vocabularies ----------------------------------------------------------

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;

struct WordVocabulary {
  std::vector<std::string> words;  // words[0] = "[PAD]", words[1] = "[UNK]"
  std::unordered_map<std::string, int> index;

  int id(std::string_view word) const;  // lowercases; UNK when absent
  int size() const { return static_cast<int>(words.size()); }
};

struct LabelVocabulary {
  std::vector<std::string> labels;  // labels[0] = "O"
  std::unordered_map<std::string, int> index;

  // Throws ValidationError listing the label.
  int id(const std::string& label) const;
  int size() const { return static_cast<int>(labels.size()); }
};

LabelVocabulary make_label_vocabulary(std::vector<std::string> labels);

struct Vocabularies {
  WordVocabulary words;
  StyleVocabulary styles;
  LabelVocabulary labels;
};

std::string to_lower(std::string_view s);

// Words are lowercased and ranked by frequency then lexicographically; fonts
// likewise, keeping font_top_k. Labels: "O" first, then the rest sorted.
Vocabularies build_vocabularies(std::span<const DocumentRecord> training,
                                const BucketingConfig& cfg, std::size_t max_words = 5000);

nlohmann::json to_json(const Vocabularies& v);
Vocabularies vocabularies_from_json(const nlohmann::json& j);

// ---- Model input -----------------------------------------------------------

struct ModelInput {
  std::vector<int> word_ids;
  std::vector<int> x1_ids, y1_ids, x2_ids, y2_ids, w_ids, h_ids;
  std::vector<int> pos1d_ids;
  std::array<std::vector<int>, kNumStyleFeatures> style_ids;
  std::vector<int> label_ids;
  std::vector<bool> mask;
  std::vector<int> page_ids;

  std::size_t size() const { return word_ids.size(); }
  // Tokens [begin, end) with positions re-based to 0.
  ModelInput slice(std::size_t begin, std::size_t end) const;
  bool operator==(const ModelInput&) const = default;
};

ModelInput encode_document(const DocumentRecord& doc, const Vocabularies& vocabs,
                           const BucketingConfig& cfg);

}  // namespace ielab

#endif  // IELAB_DOCSTREAM_HPP_
