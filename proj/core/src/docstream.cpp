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

#include "ielab/docstream.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "ielab/error.hpp"

namespace ielab {

using nlohmann::json;

// ---- Records ---------------------------------------------------------------

bool is_valid_label(std::string_view label) {
  static const std::regex kLabel("^(O|[BI]-[A-Z0-9_]+)$");
  return std::regex_match(label.begin(), label.end(), kLabel);
}

void validate_document(const DocumentRecord& doc) {
  const std::string where = "document '" + doc.id + "'";
  if (doc.pages.empty()) throw ValidationError(where + ": field pages: at least one page required");
  for (std::size_t p = 0; p < doc.pages.size(); ++p) {
    if (!(doc.pages[p].width > 0.0) || !(doc.pages[p].height > 0.0)) {
      throw ValidationError(where + ": field pages[" + std::to_string(p) +
                            "]: width and height must be > 0");
    }
  }
  if (doc.tokens.empty()) throw ValidationError(where + ": field tokens: at least one token required");
  for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
    const TokenRecord& t = doc.tokens[i];
    auto fail = [&](const std::string& field, const std::string& msg) {
      throw ValidationError(where + " token " + std::to_string(i) + ": field " + field + ": " + msg);
    };
    if (t.page < 0 || static_cast<std::size_t>(t.page) >= doc.pages.size()) {
      fail("page", "index " + std::to_string(t.page) + " outside " +
                       std::to_string(doc.pages.size()) + " pages");
    }
    if (!std::isfinite(t.bbox.x1) || !std::isfinite(t.bbox.y1) || !std::isfinite(t.bbox.x2) ||
        !std::isfinite(t.bbox.y2)) {
      fail("bbox", "non-finite coordinate");
    }
    if (t.bbox.x1 > t.bbox.x2) fail("bbox", "x1 > x2");
    if (t.bbox.y1 > t.bbox.y2) fail("bbox", "y1 > y2");
    if (!(t.font_size > 0.0) || !std::isfinite(t.font_size)) fail("font_size", "must be > 0");
    for (int c : {t.color.r, t.color.g, t.color.b}) {
      if (c < 0 || c > 255) fail("color", "channel " + std::to_string(c) + " outside 0..255");
    }
    if (!is_valid_label(t.label)) fail("label", "'" + t.label + "' is not an IOB tag");
  }
}

json document_to_json(const DocumentRecord& doc) {
  json pages = json::array();
  for (const auto& p : doc.pages) pages.push_back({{"width", p.width}, {"height", p.height}});
  json tokens = json::array();
  for (const auto& t : doc.tokens) {
    tokens.push_back({{"text", t.text},
                      {"page", t.page},
                      {"bbox", {t.bbox.x1, t.bbox.y1, t.bbox.x2, t.bbox.y2}},
                      {"bold", t.bold},
                      {"font", t.font},
                      {"font_size", t.font_size},
                      {"in_table", t.in_table},
                      {"color", {t.color.r, t.color.g, t.color.b}},
                      {"label", t.label}});
  }
  return {{"id", doc.id}, {"pages", pages}, {"tokens", tokens}};
}

DocumentRecord document_from_json(const json& j) {
  DocumentRecord doc;
  doc.id = j.at("id").get<std::string>();
  for (const auto& p : j.at("pages")) {
    doc.pages.push_back({p.at("width").get<double>(), p.at("height").get<double>()});
  }
  for (const auto& t : j.at("tokens")) {
    TokenRecord tok;
    tok.text = t.at("text").get<std::string>();
    tok.page = t.at("page").get<int>();
    const auto& b = t.at("bbox");
    if (!b.is_array() || b.size() != 4) throw json::other_error::create(501, "bbox must be [x1,y1,x2,y2]", &b);
    tok.bbox = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    tok.bold = t.at("bold").get<bool>();
    tok.font = t.at("font").get<std::string>();
    tok.font_size = t.at("font_size").get<double>();
    tok.in_table = t.at("in_table").get<bool>();
    const auto& c = t.at("color");
    if (!c.is_array() || c.size() != 3) throw json::other_error::create(501, "color must be [r,g,b]", &c);
    tok.color = {c[0].get<int>(), c[1].get<int>(), c[2].get<int>()};
    tok.label = t.at("label").get<std::string>();
    doc.tokens.push_back(std::move(tok));
  }
  return doc;
}

std::vector<DocumentRecord> parse_documents(std::string_view jsonl) {
  std::vector<DocumentRecord> docs;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    DocumentRecord doc;
    try {
      doc = document_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    validate_document(doc);
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::string serialize_documents(std::span<const DocumentRecord> docs) {
  std::string out;
  for (const auto& d : docs) {
    out += document_to_json(d).dump();
    out += '\n';
  }
  return out;
}

std::vector<DocumentRecord> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_documents(ss.str());
}

void write_corpus(const std::filesystem::path& path, std::span<const DocumentRecord> docs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const std::string s = serialize_documents(docs);
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

// ---- Geometry --------------------------------------------------------------

namespace {

int quantize(double v, double extent) {
  const long q = std::lround(static_cast<double>(kCoordMax) * v / extent);
  return static_cast<int>(std::clamp<long>(q, 0, kCoordMax));
}

}  // namespace

QuantizedBox normalize_bbox(const BBox& box, const PageSize& page) {
  if (!(page.width > 0.0) || !(page.height > 0.0)) {
    throw ConfigError("normalize_bbox: page dimensions must be > 0");
  }
  QuantizedBox q;
  q.x1 = quantize(box.x1, page.width);
  q.y1 = quantize(box.y1, page.height);
  q.x2 = quantize(box.x2, page.width);
  q.y2 = quantize(box.y2, page.height);
  q.w = std::clamp(q.x2 - q.x1, 0, kCoordMax);
  q.h = std::clamp(q.y2 - q.y1, 0, kCoordMax);
  return q;
}

// ---- Style bucketing -------------------------------------------------------

std::string_view feature_name(StyleFeature f) {
  switch (f) {
    case StyleFeature::kBold: return "bold";
    case StyleFeature::kFont: return "font";
    case StyleFeature::kFontSize: return "fontSize";
    case StyleFeature::kInTable: return "inTable";
    case StyleFeature::kColor: return "color";
  }
  return "?";
}

StyleFeature parse_feature(std::string_view name) {
  if (name == "bold") return StyleFeature::kBold;
  if (name == "font") return StyleFeature::kFont;
  if (name == "fontSize" || name == "font_size") return StyleFeature::kFontSize;
  if (name == "inTable" || name == "in_table") return StyleFeature::kInTable;
  if (name == "color") return StyleFeature::kColor;
  throw ConfigError("unknown style feature '" + std::string(name) +
                    "' (expected bold, font, fontSize, inTable or color)");
}

void BucketingConfig::validate() const {
  if (!(fontsize_bounds[0] < fontsize_bounds[1])) {
    throw ConfigError("bucketing: fontsize bounds must be strictly increasing");
  }
  if (font_top_k < 1) throw ConfigError("bucketing: font_top_k must be >= 1");
}

json to_json(const BucketingConfig& c) {
  return {{"black_max_channel", c.black_max_channel},
          {"fontsize_cluster_bounds", c.fontsize_bounds},
          {"font_top_k", c.font_top_k}};
}

BucketingConfig bucketing_from_json(const json& j) {
  BucketingConfig c;
  c.black_max_channel = j.value("black_max_channel", c.black_max_channel);
  if (j.contains("fontsize_cluster_bounds")) {
    c.fontsize_bounds = j.at("fontsize_cluster_bounds").get<std::array<double, 2>>();
  }
  c.font_top_k = j.value("font_top_k", c.font_top_k);
  c.validate();
  return c;
}

DocumentStyleStats document_style_stats(const DocumentRecord& doc) {
  DocumentStyleStats s;
  std::vector<double> sizes;
  sizes.reserve(doc.tokens.size());
  for (const auto& t : doc.tokens) {
    sizes.push_back(t.font_size);
    ++s.font_counts[t.font];
  }
  if (!sizes.empty()) {
    std::sort(sizes.begin(), sizes.end());
    s.median_font_size = sizes[(sizes.size() - 1) / 2];
  }
  return s;
}

int StyleVocabulary::font_index(const std::string& font) const {
  for (std::size_t i = 0; i < fonts.size(); ++i) {
    if (fonts[i] == font) return static_cast<int>(i) + 1;
  }
  return kFontOther;
}

int StyleVocabulary::size(StyleFeature f) const {
  switch (f) {
    case StyleFeature::kBold: return 2;
    case StyleFeature::kFont: return font_top_k + 1;
    case StyleFeature::kFontSize: return 3;
    case StyleFeature::kInTable: return 2;
    case StyleFeature::kColor: return 2;
  }
  return 0;
}

std::array<int, kNumStyleFeatures> StyleVocabulary::sizes() const {
  std::array<int, kNumStyleFeatures> out{};
  for (StyleFeature f : kAllStyleFeatures) out[static_cast<std::size_t>(f)] = size(f);
  return out;
}

int color_bucket(const Rgb& c, const BucketingConfig& cfg) {
  return std::max({c.r, c.g, c.b}) < cfg.black_max_channel ? kColorBlack : kColorNotBlack;
}

int fontsize_bucket(double ratio, const BucketingConfig& cfg) {
  if (ratio < cfg.fontsize_bounds[0]) return 0;
  if (ratio <= cfg.fontsize_bounds[1]) return 1;
  return 2;
}

StyleBuckets bucket_styles(const TokenRecord& token, const DocumentStyleStats& stats,
                           const BucketingConfig& cfg, const StyleVocabulary& vocab) {
  StyleBuckets b{};
  b[static_cast<std::size_t>(StyleFeature::kBold)] = token.bold ? 1 : 0;
  b[static_cast<std::size_t>(StyleFeature::kFont)] = vocab.font_index(token.font);
  const double ratio = stats.median_font_size > 0.0 ? token.font_size / stats.median_font_size : 1.0;
  b[static_cast<std::size_t>(StyleFeature::kFontSize)] = fontsize_bucket(ratio, cfg);
  b[static_cast<std::size_t>(StyleFeature::kInTable)] = token.in_table ? 1 : 0;
  b[static_cast<std::size_t>(StyleFeature::kColor)] = color_bucket(token.color, cfg);
  return b;
}

// ---- Vocabularies ----------------------------------------------------------

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

int WordVocabulary::id(std::string_view word) const {
  auto it = index.find(to_lower(word));
  return it == index.end() ? kUnkId : it->second;
}

int LabelVocabulary::id(const std::string& label) const {
  auto it = index.find(label);
  if (it == index.end()) {
    throw ValidationError("label '" + label + "' is not in the label vocabulary");
  }
  return it->second;
}

LabelVocabulary make_label_vocabulary(std::vector<std::string> labels) {
  std::set<std::string> rest(labels.begin(), labels.end());
  rest.erase("O");
  LabelVocabulary v;
  v.labels.push_back("O");
  v.labels.insert(v.labels.end(), rest.begin(), rest.end());
  for (std::size_t i = 0; i < v.labels.size(); ++i) v.index[v.labels[i]] = static_cast<int>(i);
  return v;
}

namespace {

// Frequency descending, then lexicographic.
std::vector<std::string> rank_by_frequency(const std::map<std::string, std::size_t>& counts) {
  std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  out.reserve(items.size());
  for (auto& [k, _] : items) out.push_back(k);
  return out;
}

}  // namespace

Vocabularies build_vocabularies(std::span<const DocumentRecord> training,
                                const BucketingConfig& cfg, std::size_t max_words) {
  cfg.validate();
  if (training.empty()) throw ConfigError("build_vocabularies: empty corpus");
  if (max_words < 2) throw ConfigError("build_vocabularies: max_words must be >= 2");
  std::map<std::string, std::size_t> word_counts, font_counts;
  std::vector<std::string> labels;
  std::set<std::string> seen_labels;
  for (const auto& d : training) {
    for (const auto& t : d.tokens) {
      ++word_counts[to_lower(t.text)];
      ++font_counts[t.font];
      if (seen_labels.insert(t.label).second) labels.push_back(t.label);
    }
  }
  Vocabularies v;
  v.words.words = {"[PAD]", "[UNK]"};
  for (const auto& w : rank_by_frequency(word_counts)) {
    if (v.words.words.size() >= max_words) break;
    if (w == "[PAD]" || w == "[UNK]") continue;
    v.words.words.push_back(w);
  }
  for (std::size_t i = 0; i < v.words.words.size(); ++i) {
    v.words.index[v.words.words[i]] = static_cast<int>(i);
  }
  v.styles.font_top_k = cfg.font_top_k;
  auto fonts = rank_by_frequency(font_counts);
  if (fonts.size() > static_cast<std::size_t>(cfg.font_top_k)) fonts.resize(cfg.font_top_k);
  v.styles.fonts = std::move(fonts);
  v.labels = make_label_vocabulary(std::move(labels));
  return v;
}

json to_json(const Vocabularies& v) {
  json features = json::array();
  for (StyleFeature f : kAllStyleFeatures) {
    features.push_back({{"name", feature_name(f)}, {"size", v.styles.size(f)}});
  }
  return {{"words", v.words.words},
          {"labels", v.labels.labels},
          {"styles", {{"feature_order", features}, {"fonts", v.styles.fonts},
                      {"font_top_k", v.styles.font_top_k}}}};
}

Vocabularies vocabularies_from_json(const json& j) {
  Vocabularies v;
  v.words.words = j.at("words").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < v.words.words.size(); ++i) {
    v.words.index[v.words.words[i]] = static_cast<int>(i);
  }
  v.labels.labels = j.at("labels").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < v.labels.labels.size(); ++i) {
    v.labels.index[v.labels.labels[i]] = static_cast<int>(i);
  }
  const auto& s = j.at("styles");
  std::size_t i = 0;
  for (const auto& f : s.at("feature_order")) {
    if (i >= kNumStyleFeatures ||
        parse_feature(f.at("name").get<std::string>()) != kAllStyleFeatures[i]) {
      throw MismatchError("vocabulary file lists style features in an unexpected order");
    }
    ++i;
  }
  v.styles.fonts = s.at("fonts").get<std::vector<std::string>>();
  v.styles.font_top_k = s.at("font_top_k").get<int>();
  return v;
}

// ---- Encoding --------------------------------------------------------------

ModelInput ModelInput::slice(std::size_t begin, std::size_t end) const {
  auto cut = [&](const std::vector<int>& v) {
    return std::vector<int>(v.begin() + static_cast<std::ptrdiff_t>(begin),
                            v.begin() + static_cast<std::ptrdiff_t>(end));
  };
  ModelInput out;
  out.word_ids = cut(word_ids);
  out.x1_ids = cut(x1_ids);
  out.y1_ids = cut(y1_ids);
  out.x2_ids = cut(x2_ids);
  out.y2_ids = cut(y2_ids);
  out.w_ids = cut(w_ids);
  out.h_ids = cut(h_ids);
  for (std::size_t m = 0; m < kNumStyleFeatures; ++m) out.style_ids[m] = cut(style_ids[m]);
  out.label_ids = cut(label_ids);
  out.mask.assign(mask.begin() + static_cast<std::ptrdiff_t>(begin),
                  mask.begin() + static_cast<std::ptrdiff_t>(end));
  out.page_ids = cut(page_ids);
  out.pos1d_ids.resize(end - begin);
  for (std::size_t i = 0; i < end - begin; ++i) out.pos1d_ids[i] = static_cast<int>(i);
  return out;
}

ModelInput encode_document(const DocumentRecord& doc, const Vocabularies& vocabs,
                           const BucketingConfig& cfg) {
  const DocumentStyleStats stats = document_style_stats(doc);
  const std::size_t t = doc.tokens.size();
  ModelInput in;
  for (auto* v : {&in.word_ids, &in.x1_ids, &in.y1_ids, &in.x2_ids, &in.y2_ids, &in.w_ids,
                  &in.h_ids, &in.pos1d_ids, &in.label_ids, &in.page_ids}) {
    v->reserve(t);
  }
  for (std::size_t i = 0; i < t; ++i) {
    const TokenRecord& tok = doc.tokens[i];
    in.word_ids.push_back(vocabs.words.id(tok.text));
    const QuantizedBox q = normalize_bbox(tok.bbox, doc.pages.at(static_cast<std::size_t>(tok.page)));
    in.x1_ids.push_back(q.x1);
    in.y1_ids.push_back(q.y1);
    in.x2_ids.push_back(q.x2);
    in.y2_ids.push_back(q.y2);
    in.w_ids.push_back(q.w);
    in.h_ids.push_back(q.h);
    in.pos1d_ids.push_back(static_cast<int>(i));
    const StyleBuckets b = bucket_styles(tok, stats, cfg, vocabs.styles);
    for (std::size_t m = 0; m < kNumStyleFeatures; ++m) in.style_ids[m].push_back(b[m]);
    in.label_ids.push_back(vocabs.labels.id(tok.label));
    in.page_ids.push_back(tok.page);
  }
  in.mask.assign(t, true);
  return in;
}

}  // namespace ielab
