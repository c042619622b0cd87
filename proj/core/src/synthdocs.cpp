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

#include "ielab/synthdocs.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "ielab/error.hpp"
#include "ielab/rng.hpp"

namespace ielab {

using nlohmann::json;

std::string_view to_string(DocTemplate t) {
  switch (t) {
    case DocTemplate::kTradeConf: return "TRADECONF";
    case DocTemplate::kFeeSchedule: return "FEESCHEDULE";
    case DocTemplate::kInvoice: return "INVOICE";
  }
  return "?";
}

DocTemplate parse_template(std::string_view name) {
  if (name == "TRADECONF") return DocTemplate::kTradeConf;
  if (name == "FEESCHEDULE") return DocTemplate::kFeeSchedule;
  if (name == "INVOICE") return DocTemplate::kInvoice;
  throw ConfigError("unknown template '" + std::string(name) +
                    "' (expected TRADECONF, FEESCHEDULE or INVOICE)");
}

namespace {

// kRoundAmount and kUnitPrice are amounts written as round thousands and as
// small two-decimal prices; they share the amount keys.
enum class ValueType { kDate, kAmount, kRoundAmount, kUnitPrice, kPercent, kName, kCode, kEnum,
                       kInt, kAddress, kCompany, kBranch, kIban, kWeight };

struct FieldDef {
  std::string cls;  // empty for distractors
  ValueType type;
  std::vector<std::string> keys;
  std::vector<std::string> values;  // kEnum only
  bool bold_prone = false;
  bool table_prone = false;
  bool large_prone = false;
  bool color_prone = false;
};

struct TemplateDef {
  std::string title;
  std::vector<FieldDef> fields;  // canonical order
  std::vector<FieldDef> distractors;
};

const std::vector<std::string>& generic_keys(ValueType t) {
  static const std::map<ValueType, std::vector<std::string>> keys = {
      {ValueType::kDate, {"date"}},
      {ValueType::kAmount, {"amount", "value"}},
      {ValueType::kRoundAmount, {"amount", "value"}},
      {ValueType::kUnitPrice, {"amount", "value"}},
      {ValueType::kPercent, {"pct", "level"}},
      {ValueType::kName, {"name", "contact"}},
      {ValueType::kCode, {"ref", "reference"}},
      {ValueType::kEnum, {"type"}},
      {ValueType::kInt, {"units", "qty"}},
      {ValueType::kAddress, {"address"}},
      {ValueType::kCompany, {"company"}},
      {ValueType::kBranch, {"office"}},
      {ValueType::kIban, {"account"}},
      {ValueType::kWeight, {"weight"}},
  };
  return keys.at(t);
}

const TemplateDef& template_def(DocTemplate t) {
  using V = ValueType;
  static const TemplateDef trade{
      "trade confirmation",
      {
          {"TRADE_DATE", V::kDate, {"trade date", "dealt on"}, {}, true},
          {"TRADE_STATUS", V::kEnum, {"status"}, {"confirmed", "pending", "amended"}, true},
          {"BUYSELL", V::kEnum, {"side", "direction"}, {"buy", "sell"}, true},
          {"CONTRACT", V::kCode, {"contract", "contract id"}, {}, true},
          {"MARKET", V::kEnum, {"market", "exchange"}, {"nyse", "lse", "cme", "ice", "xetra"}, true},
          {"CALLPUT", V::kEnum, {"option type"}, {"call", "put"}, true},
          {"STRIKE_VALUE", V::kRoundAmount, {"strike", "strike price"}, {}, true, true},
          {"TRADE_PRICE", V::kUnitPrice, {"price", "trade price"}, {}, true, true},
          {"TRADE_VOLUME", V::kInt, {"volume", "quantity"}, {}, true, true},
          {"EXPIRY_DATE", V::kDate, {"expiry date", "expiry"}, {}, true},
          {"EXECUTIVE_BROKER", V::kName, {"broker", "executing broker"}, {}, true},
          {"CLEAR_INFO", V::kEnum, {"clearing house", "cleared via"},
           {"lch", "eurex", "occ", "jscc"}, true},
      },
      {
          {"", V::kDate, {"settlement date", "value date"}, {}},
          {"", V::kRoundAmount, {"fee", "commission"}, {}},
          {"", V::kUnitPrice, {"fee", "commission"}, {}},
          {"", V::kName, {"desk contact", "sales"}, {}},
          {"", V::kCode, {"ticket", "our ref"}, {}},
          {"", V::kInt, {"lots"}, {}},
      }};
  static const TemplateDef fee{
      "fee schedule",
      {
          {"CLIENT_NAME", V::kName, {"client", "client name"}, {}, false, false, true},
          {"BRANCH_NAME", V::kBranch, {"branch"}, {}, false, false, true},
          {"APPLICATION_DATE", V::kDate, {"application date", "effective from"}, {}},
          {"MARGIN", V::kPercent, {"margin"}, {}, false, true},
          {"RATE", V::kPercent, {"rate", "interest rate"}, {}, false, true},
      },
      {
          {"", V::kDate, {"review date", "printed"}, {}},
          {"", V::kPercent, {"fee rate", "tax rate"}, {}},
          {"", V::kName, {"advisor", "prepared by"}, {}},
          {"", V::kBranch, {"agency"}, {}},
      }};
  static const TemplateDef invoice{
      "invoice",
      {
          {"COMPANYNAME", V::kCompany, {"bill to", "customer"}, {}},
          {"ADDRESS", V::kAddress, {"ship to", "deliver to"}, {}},
          {"PERSONNAME", V::kName, {"attn", "contact person"}, {}},
          {"INVOICENUMBER", V::kCode, {"invoice no", "invoice number"}, {}},
          {"DOCUMENTDATE", V::kDate, {"invoice date", "issued"}, {}},
          {"ACCOUNTNUMBER", V::kCode, {"account no"}, {}},
          {"IBAN", V::kIban, {"iban"}, {}},
          {"GROSSWEIGHT", V::kWeight, {"gross weight"}, {}, false, true},
          {"TOTAL", V::kAmount, {"total", "amount due"}, {}, false, true, false, true},
      },
      {
          {"", V::kAmount, {"subtotal", "tax"}, {}},
          {"", V::kDate, {"due date", "order date"}, {}},
          {"", V::kCode, {"order no", "po number"}, {}},
          {"", V::kName, {"sales rep"}, {}},
          {"", V::kWeight, {"net weight"}, {}},
      }};
  switch (t) {
    case DocTemplate::kTradeConf: return trade;
    case DocTemplate::kFeeSchedule: return fee;
    case DocTemplate::kInvoice: return invoice;
  }
  return trade;
}

// ---- Value pools -----------------------------------------------------------

const std::vector<std::string>& first_names() {
  static const std::vector<std::string> v = {
      "anna", "ben", "clara", "david", "emma", "felix", "grace", "hugo", "iris", "jonas",
      "karin", "leo", "maria", "nils", "olga", "paul", "rosa", "sam", "tara", "victor"};
  return v;
}

const std::vector<std::string>& last_names() {
  static const std::vector<std::string> v = {
      "martin", "bernard", "dubois", "laurent", "simon", "michel", "leroy", "roux", "morel",
      "fournier", "girard", "andre", "mercier", "blanc", "guerin", "boyer", "garnier",
      "chevalier", "francois", "legrand"};
  return v;
}

const std::vector<std::string>& cities() {
  static const std::vector<std::string> v = {"paris", "lyon", "lille", "nantes", "geneva",
                                             "london", "milan", "madrid", "berlin", "vienna"};
  return v;
}

const std::vector<std::string>& streets() {
  static const std::vector<std::string> v = {"rue", "avenue", "road", "street", "boulevard",
                                             "lane"};
  return v;
}

const std::vector<std::string>& company_words() {
  static const std::vector<std::string> v = {"acme", "globex", "initech", "umbrella", "stark",
                                             "wayne", "tyrell", "cyberdyne", "soylent", "vandelay"};
  return v;
}

// Formatted values drawn from small deterministic pools so the word
// vocabulary covers them.
std::string pool_value(ValueType t, Rng& rng) {
  auto draw = [&rng](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
  char buf[64];
  switch (t) {
    case ValueType::kDate:
      std::snprintf(buf, sizeof buf, "%02d/%02d/2021", 1 + draw(28), 1 + 2 * draw(6));
      return buf;
    case ValueType::kAmount:
      std::snprintf(buf, sizeof buf, "%d,%03d.%02d", 1 + draw(9), 50 * draw(20), 25 * draw(4));
      return buf;
    case ValueType::kRoundAmount:
      std::snprintf(buf, sizeof buf, "%d,%03d.00", 1 + draw(9), 250 * draw(4));
      return buf;
    case ValueType::kUnitPrice:
      std::snprintf(buf, sizeof buf, "%d.%02d", 10 + draw(90), 25 * draw(4));
      return buf;
    case ValueType::kPercent:
      std::snprintf(buf, sizeof buf, "%d.%02d%%", draw(5), 25 * draw(4));
      return buf;
    case ValueType::kCode:
      std::snprintf(buf, sizeof buf, "%c%c-%03d", 'A' + draw(6), 'K' + draw(6), 10 * draw(40));
      return buf;
    case ValueType::kInt:
      std::snprintf(buf, sizeof buf, "%d", 100 * (1 + draw(60)));
      return buf;
    case ValueType::kIban:
      std::snprintf(buf, sizeof buf, "FR76%04d%04d", 1000 + 37 * draw(40), 2000 + 53 * draw(40));
      return buf;
    case ValueType::kWeight:
      std::snprintf(buf, sizeof buf, "%dkg", 10 * (1 + draw(50)));
      return buf;
    default: return {};
  }
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

std::vector<std::string> draw_value(const FieldDef& f, Rng& rng) {
  auto pick = [&rng](const std::vector<std::string>& v) { return v[rng() % v.size()]; };
  switch (f.type) {
    case ValueType::kName: return {pick(first_names()), pick(last_names())};
    case ValueType::kEnum: return {pick(f.values)};
    case ValueType::kAddress: {
      char num[8];
      std::snprintf(num, sizeof num, "%d", 1 + static_cast<int>(rng() % 99));
      return {num, pick(streets()), pick(cities())};
    }
    case ValueType::kCompany: return {pick(company_words()), rng() % 2 ? "sa" : "ltd"};
    case ValueType::kBranch: return {pick(cities()), "branch"};
    default: return {pool_value(f.type, rng)};
  }
}

// Pronounceable filler words, ranked for a Zipf-like draw.
std::vector<std::string> filler_vocabulary(int n) {
  static const char* onset[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
  static const char* nucleus[] = {"a", "e", "i", "o", "u"};
  std::vector<std::string> out;
  for (int i = 0; static_cast<int>(out.size()) < n; ++i) {
    std::string w;
    int x = i;
    for (int syl = 0; syl < 3; ++syl) {
      w += onset[x % 14];
      x /= 14;
      w += nucleus[(i + syl) % 5];
      if (x == 0 && syl >= 1) break;
    }
    out.push_back(w);
  }
  return out;
}

std::string zipf_word(const std::vector<std::string>& vocab, const std::vector<double>& cdf,
                      Rng& rng) {
  const double u = uniform01(rng) * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return vocab[static_cast<std::size_t>(std::min<std::ptrdiff_t>(
      it - cdf.begin(), static_cast<std::ptrdiff_t>(vocab.size()) - 1))];
}

const std::vector<std::string>& fonts() {
  static const std::vector<std::string> v = {
      "Times",   "Courier", "Arial",    "Georgia", "Verdana",  "Garamond", "Futura",
      "Calibri", "Cambria", "Palatino", "Tahoma",  "Rockwell", "Consolas"};
  return v;
}

constexpr const char* kBodyFont = "Helvetica";
constexpr double kBodySize = 10.0;
constexpr double kLargeSize = 16.0;  // ratio 1.6, middle cluster
constexpr double kHugeSize = 24.0;   // ratio 2.4, top cluster
constexpr double kCharWidth = 7.0;   // grid units per character at the body size
constexpr double kLineStep = 38.0;
constexpr double kMargin = 40.0;
constexpr double kValueColumn = 320.0;

bool bernoulli(double p, Rng& rng) { return uniform01(rng) < p; }

struct Styling {
  bool bold = false, in_table = false, large = false, colored = false;
};

// Per-token noise styling for O tokens.
Styling noise_style(double noise, Rng& rng) {
  Styling s;
  s.bold = bernoulli(noise, rng);
  s.in_table = bernoulli(noise, rng);
  s.large = bernoulli(noise, rng);
  s.colored = bernoulli(noise, rng);
  return s;
}

struct Field {
  const FieldDef* def;
  bool entity;
  std::vector<std::string> key;
  std::vector<std::string> value;
  std::size_t size() const { return key.size() + value.size(); }
};

struct Line {
  std::vector<std::string> words;
  std::size_t key_len = 0;  // words before the value column
  std::string cls;          // entity class of the value, empty when O
  const FieldDef* def = nullptr;
  bool title = false;
};

class PageWriter {
 public:
  explicit PageWriter(DocumentRecord& doc) : doc_(doc) { new_page(); }

  void write_line(const Line& line, const std::vector<Styling>& styles, const std::vector<std::string>& labels,
                  const std::vector<std::string>& fonts_used) {
    if (y_ + kLineStep > 1000.0 - kMargin) new_page();
    double x = kMargin;
    for (std::size_t i = 0; i < line.words.size(); ++i) {
      if (!line.title && i == line.key_len && line.key_len > 0) x = std::max(x, kValueColumn);
      const double w = kCharWidth * static_cast<double>(line.words[i].size());
      if (x + w > 1000.0 - kMargin) {
        new_line();
        x = kMargin;
      }
      TokenRecord t;
      t.text = line.words[i];
      t.page = static_cast<int>(doc_.pages.size()) - 1;
      t.bbox = {x, y_, x + w, y_ + 14.0};
      t.bold = styles[i].bold;
      t.in_table = styles[i].in_table;
      t.font = fonts_used[i];
      t.font_size = styles[i].large ? kLargeSize : kBodySize;
      t.color = styles[i].colored ? Rgb{200, 30, 30} : Rgb{0, 0, 0};
      t.label = labels[i];
      doc_.tokens.push_back(std::move(t));
      x += w + kCharWidth;
    }
    new_line();
  }

 private:
  void new_page() {
    doc_.pages.push_back({1000.0, 1000.0});
    y_ = kMargin;
  }
  void new_line() {
    y_ += kLineStep;
    if (y_ + kLineStep > 1000.0 - kMargin) new_page();
  }

  DocumentRecord& doc_;
  double y_ = kMargin;
};

}  // namespace

std::vector<std::string> template_classes(DocTemplate t) {
  std::vector<std::string> out;
  for (const auto& f : template_def(t).fields) out.push_back(f.cls);
  std::sort(out.begin(), out.end());
  return out;
}

int GeneratorConfig::min_tokens() const {
  // Title plus three fields of at most two key and three value words.
  return static_cast<int>(split_words(template_def(tmpl).title).size()) + 3 * 5;
}

void GeneratorConfig::validate() const {
  for (double p : {p_bold_entity, p_table_amount, p_largefont_name, p_color_total, noise,
                   p_generic_key, p_field}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("generator: probabilities must lie in [0, 1]");
  }
  if (n_docs < 1) throw ConfigError("generator: n_docs must be >= 1");
  if (tokens_per_doc[0] > tokens_per_doc[1]) {
    throw ConfigError("generator: tokens_per_doc must be an increasing pair");
  }
  if (tokens_per_doc[0] < min_tokens()) {
    throw ConfigError("generator: token budget " + std::to_string(tokens_per_doc[0]) +
                      " is too small for template " + std::string(to_string(tmpl)) +
                      " (needs at least " + std::to_string(min_tokens()) + ")");
  }
  if (distractors[0] < 0 || distractors[0] > distractors[1]) {
    throw ConfigError("generator: distractors must be an increasing non-negative pair");
  }
  if (filler_words < 1) throw ConfigError("generator: filler_words must be >= 1");
  if (raster_size < 8) throw ConfigError("generator: raster_size must be >= 8");
}

json to_json(const GeneratorConfig& c) {
  return {{"template", std::string(to_string(c.tmpl))},
          {"n_docs", c.n_docs},
          {"tokens_per_doc", c.tokens_per_doc},
          {"p_bold_entity", c.p_bold_entity},
          {"p_table_amount", c.p_table_amount},
          {"p_largefont_name", c.p_largefont_name},
          {"p_color_total", c.p_color_total},
          {"noise", c.noise},
          {"p_generic_key", c.p_generic_key},
          {"p_field", c.p_field},
          {"distractors", c.distractors},
          {"filler_words", c.filler_words},
          {"raster_size", c.raster_size},
          {"seed", c.seed}};
}

GeneratorConfig generator_config_from_json(const json& j) {
  GeneratorConfig c;
  if (j.contains("template")) c.tmpl = parse_template(j.at("template").get<std::string>());
  c.n_docs = j.value("n_docs", c.n_docs);
  c.tokens_per_doc = j.value("tokens_per_doc", c.tokens_per_doc);
  c.p_bold_entity = j.value("p_bold_entity", c.p_bold_entity);
  c.p_table_amount = j.value("p_table_amount", c.p_table_amount);
  c.p_largefont_name = j.value("p_largefont_name", c.p_largefont_name);
  c.p_color_total = j.value("p_color_total", c.p_color_total);
  c.noise = j.value("noise", c.noise);
  c.p_generic_key = j.value("p_generic_key", c.p_generic_key);
  c.p_field = j.value("p_field", c.p_field);
  c.distractors = j.value("distractors", c.distractors);
  c.filler_words = j.value("filler_words", c.filler_words);
  c.raster_size = j.value("raster_size", c.raster_size);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

GeneratorConfig label_independent(GeneratorConfig cfg, double rate) {
  cfg.p_bold_entity = cfg.p_table_amount = cfg.p_largefont_name = cfg.p_color_total = rate;
  cfg.noise = rate;
  return cfg;
}

DocumentRecord generate_document(const GeneratorConfig& cfg, int index) {
  const TemplateDef& def = template_def(cfg.tmpl);
  Rng rng = make_rng(cfg.seed, "synth.doc", static_cast<std::uint64_t>(index));
  auto pick = [&rng](const std::vector<std::string>& v) { return v[rng() % v.size()]; };
  auto uniform_int = [&rng](int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };

  const int target = uniform_int(cfg.tokens_per_doc[0], cfg.tokens_per_doc[1]);

  // Entity fields in canonical order, at least three.
  std::vector<const FieldDef*> chosen;
  std::vector<bool> keep(def.fields.size());
  for (std::size_t i = 0; i < def.fields.size(); ++i) keep[i] = bernoulli(cfg.p_field, rng);
  while (std::count(keep.begin(), keep.end(), true) < std::min<std::ptrdiff_t>(3, static_cast<std::ptrdiff_t>(keep.size()))) {
    keep[rng() % keep.size()] = true;
  }
  std::vector<Field> fields;
  auto make_field = [&](const FieldDef& f, bool entity) {
    Field fl{&f, entity, {}, {}};
    const bool generic = bernoulli(cfg.p_generic_key, rng);
    fl.key = split_words(generic && f.type != ValueType::kEnum ? pick(generic_keys(f.type))
                                                                : pick(f.keys));
    fl.value = draw_value(f, rng);
    return fl;
  };
  for (std::size_t i = 0; i < def.fields.size(); ++i) {
    if (keep[i]) fields.push_back(make_field(def.fields[i], true));
  }
  // Distractors at random positions.
  const int n_distract = uniform_int(cfg.distractors[0], cfg.distractors[1]);
  for (int d = 0; d < n_distract; ++d) {
    Field f = make_field(def.distractors[rng() % def.distractors.size()], false);
    const std::size_t at = rng() % (fields.size() + 1);
    fields.insert(fields.begin() + static_cast<std::ptrdiff_t>(at), std::move(f));
  }

  const std::vector<std::string> title = split_words(def.title);
  auto count = [&] {
    std::size_t n = title.size();
    for (const auto& f : fields) n += f.size();
    return static_cast<int>(n);
  };
  // Trim to the budget: distractors first, then entity fields, keeping three.
  while (count() > target) {
    std::vector<std::size_t> distract, entity;
    for (std::size_t i = 0; i < fields.size(); ++i) (fields[i].entity ? entity : distract).push_back(i);
    if (!distract.empty()) {
      fields.erase(fields.begin() + static_cast<std::ptrdiff_t>(distract[rng() % distract.size()]));
    } else if (entity.size() > 3) {
      fields.erase(fields.begin() + static_cast<std::ptrdiff_t>(entity[rng() % entity.size()]));
    } else {
      break;
    }
  }

  // Lines: title, fields, and filler lines up to the budget.
  std::vector<Line> lines;
  lines.push_back({title, 0, "", nullptr, true});
  for (const auto& f : fields) {
    Line l;
    l.words = f.key;
    l.words.insert(l.words.end(), f.value.begin(), f.value.end());
    l.key_len = f.key.size();
    l.cls = f.entity ? f.def->cls : "";
    l.def = f.def;
    lines.push_back(std::move(l));
  }
  static const std::vector<std::string> vocab = filler_vocabulary(200);
  const std::vector<std::string> filler(vocab.begin(),
                                        vocab.begin() + std::min<std::ptrdiff_t>(cfg.filler_words, 200));
  std::vector<double> cdf;
  double acc = 0.0;
  for (std::size_t k = 0; k < filler.size(); ++k) cdf.push_back(acc += 1.0 / static_cast<double>(k + 1));
  int remaining = target - count();
  while (remaining > 0) {
    const int n = std::min(remaining, uniform_int(2, 6));
    Line l;
    for (int k = 0; k < n; ++k) l.words.push_back(zipf_word(filler, cdf, rng));
    const std::size_t at = 1 + rng() % lines.size();
    lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(at), std::move(l));
    remaining -= n;
  }

  DocumentRecord doc;
  char id[48];
  std::snprintf(id, sizeof id, "%s-%05d", to_string(cfg.tmpl).data(), index);
  doc.id = id;
  for (auto& c : doc.id) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  PageWriter writer(doc);
  for (const Line& l : lines) {
    std::vector<Styling> styles(l.words.size());
    std::vector<std::string> labels(l.words.size(), "O");
    std::vector<std::string> used_fonts(l.words.size(), kBodyFont);
    for (std::size_t i = 0; i < l.words.size(); ++i) {
      if (bernoulli(cfg.noise, rng)) used_fonts[i] = pick(fonts());
    }
    const bool has_value = l.def != nullptr;
    const std::size_t value_begin = has_value ? l.key_len : l.words.size();
    for (std::size_t i = 0; i < value_begin; ++i) styles[i] = noise_style(cfg.noise, rng);
    if (has_value) {
      // One draw per attribute for the whole value.
      Styling s;
      const FieldDef& f = *l.def;
      const bool entity = !l.cls.empty();
      s.bold = bernoulli(entity && f.bold_prone ? cfg.p_bold_entity : cfg.noise, rng);
      s.in_table = bernoulli(entity && f.table_prone ? cfg.p_table_amount : cfg.noise, rng);
      s.large = bernoulli(entity && f.large_prone ? cfg.p_largefont_name : cfg.noise, rng);
      s.colored = bernoulli(entity && f.color_prone ? cfg.p_color_total : cfg.noise, rng);
      for (std::size_t i = value_begin; i < l.words.size(); ++i) {
        styles[i] = s;
        if (entity) labels[i] = (i == value_begin ? "B-" : "I-") + l.cls;
      }
    }
    writer.write_line(l, styles, labels, used_fonts);
  }
  // Half of the enlarged tokens land in the top size cluster.
  Rng size_rng = make_rng(cfg.seed, "synth.size", static_cast<std::uint64_t>(index));
  for (auto& t : doc.tokens) {
    if (t.font_size == kLargeSize && uniform01(size_rng) < 0.5) t.font_size = kHugeSize;
  }
  return doc;
}

std::vector<DocumentRecord> generate_corpus(const GeneratorConfig& cfg) {
  cfg.validate();
  std::vector<DocumentRecord> out;
  out.reserve(static_cast<std::size_t>(cfg.n_docs));
  for (int i = 0; i < cfg.n_docs; ++i) out.push_back(generate_document(cfg, i));
  return out;
}

// ---- Rasters ---------------------------------------------------------------

PixelRect pixel_rect(const BBox& b, int width, int height) {
  auto lo = [](double v, int n) {
    return std::clamp(static_cast<int>(std::floor(v * n / 1000.0)), 0, n - 1);
  };
  auto hi = [](double v, int n) {
    return std::clamp(static_cast<int>(std::ceil(v * n / 1000.0)) - 1, 0, n - 1);
  };
  PixelRect r{lo(b.x1, width), lo(b.y1, height), hi(b.x2, width), hi(b.y2, height)};
  r.x1 = std::max(r.x1, r.x0);
  r.y1 = std::max(r.y1, r.y0);
  return r;
}

std::vector<PageRaster> render_pages(const DocumentRecord& doc, int size) {
  if (size < 1) throw ConfigError("render_pages: size must be >= 1");
  std::vector<PageRaster> pages(doc.pages.size());
  for (auto& p : pages) {
    p.width = p.height = size;
    p.pixels.assign(static_cast<std::size_t>(size * size), 255);
  }
  auto put = [](PageRaster& p, int x, int y, std::uint8_t v) {
    if (x >= 0 && y >= 0 && x < p.width && y < p.height) {
      p.pixels[static_cast<std::size_t>(y * p.width + x)] = v;
    }
  };
  // Borders first so that fills stay inside their own boxes.
  for (const auto& t : doc.tokens) {
    if (!t.in_table) continue;
    PageRaster& p = pages.at(static_cast<std::size_t>(t.page));
    const PageSize& ps = doc.pages[static_cast<std::size_t>(t.page)];
    const BBox g{t.bbox.x1 * 1000.0 / ps.width, t.bbox.y1 * 1000.0 / ps.height,
                 t.bbox.x2 * 1000.0 / ps.width, t.bbox.y2 * 1000.0 / ps.height};
    const PixelRect r = pixel_rect(g, p.width, p.height);
    for (int x = r.x0 - 1; x <= r.x1 + 1; ++x) {
      put(p, x, r.y0 - 1, kBorder);
      put(p, x, r.y1 + 1, kBorder);
    }
    for (int y = r.y0 - 1; y <= r.y1 + 1; ++y) {
      put(p, r.x0 - 1, y, kBorder);
      put(p, r.x1 + 1, y, kBorder);
    }
  }
  for (const auto& t : doc.tokens) {
    PageRaster& p = pages.at(static_cast<std::size_t>(t.page));
    const PageSize& ps = doc.pages[static_cast<std::size_t>(t.page)];
    const BBox g{t.bbox.x1 * 1000.0 / ps.width, t.bbox.y1 * 1000.0 / ps.height,
                 t.bbox.x2 * 1000.0 / ps.width, t.bbox.y2 * 1000.0 / ps.height};
    const PixelRect r = pixel_rect(g, p.width, p.height);
    const bool colored = std::max({t.color.r, t.color.g, t.color.b}) >= 64;
    const auto fill = static_cast<std::uint8_t>((t.bold ? kFillBold : kFillRegular) +
                                                (colored ? kColorLift : 0));
    for (int y = r.y0; y <= r.y1; ++y) {
      for (int x = r.x0; x <= r.x1; ++x) put(p, x, y, fill);
    }
  }
  return pages;
}

std::string encode_pgm(const PageRaster& r) {
  std::string out = "P5\n" + std::to_string(r.width) + " " + std::to_string(r.height) + "\n255\n";
  out.append(r.pixels.begin(), r.pixels.end());
  return out;
}

PageRaster decode_pgm(std::string_view bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return std::string(bytes.substr(start, pos - start));
  };
  if (token() != "P5") throw ParseError("PGM: expected a binary (P5) header");
  PageRaster r;
  try {
    r.width = std::stoi(token());
    r.height = std::stoi(token());
    if (std::stoi(token()) != 255) throw ParseError("PGM: only maxval 255 is supported");
  } catch (const std::logic_error&) {
    throw ParseError("PGM: malformed header");
  }
  if (r.width < 1 || r.height < 1) throw ParseError("PGM: non-positive dimensions");
  ++pos;  // single whitespace byte before the raster
  const auto n = static_cast<std::size_t>(r.width) * static_cast<std::size_t>(r.height);
  if (pos + n > bytes.size()) throw ParseError("PGM: truncated pixel data");
  r.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                  bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return r;
}

void write_pgm(const std::filesystem::path& path, const PageRaster& r) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  const std::string bytes = encode_pgm(r);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

PageRaster read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return decode_pgm(ss.str());
}

Tensor raster_tensor(const PageRaster& r) {
  Tensor t(Shape{1, static_cast<std::size_t>(r.height), static_cast<std::size_t>(r.width)});
  for (std::size_t i = 0; i < r.pixels.size(); ++i) t[i] = 1.0 - r.pixels[i] / 255.0;
  return t;
}

std::filesystem::path raster_path(const std::filesystem::path& dir, const std::string& doc_id,
                                  int page) {
  return dir / (doc_id + ".page" + std::to_string(page) + ".pgm");
}

// ---- Summary ---------------------------------------------------------------

double CorpusSummary::rate(const std::string& name) const {
  const auto it = rates.find(name);
  if (it == rates.end() || it->second[1] == 0) return 0.0;
  return static_cast<double>(it->second[0]) / static_cast<double>(it->second[1]);
}

json CorpusSummary::to_json() const {
  json r = json::object();
  for (const auto& [name, c] : rates) {
    r[name] = {{"hits", c[0]}, {"total", c[1]}, {"rate", rate(name)}};
  }
  return {{"documents", documents}, {"tokens", tokens},     {"labels", labels},
          {"fonts", fonts},         {"bold", bold},         {"in_table", in_table},
          {"colored", colored},     {"large_font", large_font}, {"rates", r},
          {"boxes_in_range", boxes_in_range}};
}

CorpusSummary corpus_summary(std::span<const DocumentRecord> docs, DocTemplate t) {
  if (docs.empty()) throw ConfigError("corpus_summary: empty corpus");
  const TemplateDef& def = template_def(t);
  std::set<std::string> bold_prone, table_prone, large_prone, color_prone;
  for (const auto& f : def.fields) {
    if (f.bold_prone) bold_prone.insert(f.cls);
    if (f.table_prone) table_prone.insert(f.cls);
    if (f.large_prone) large_prone.insert(f.cls);
    if (f.color_prone) color_prone.insert(f.cls);
  }
  CorpusSummary s;
  s.documents = docs.size();
  auto tally = [&s](const std::string& name, bool hit) {
    auto& c = s.rates[name];
    c[0] += hit ? 1 : 0;
    c[1] += 1;
  };
  for (const auto& d : docs) {
    const DocumentStyleStats stats = document_style_stats(d);
    for (const auto& tok : d.tokens) {
      ++s.tokens;
      ++s.labels[tok.label];
      ++s.fonts[tok.font];
      const bool colored = std::max({tok.color.r, tok.color.g, tok.color.b}) >= 64;
      const bool large = tok.font_size / stats.median_font_size >= 1.2;
      s.bold += tok.bold;
      s.in_table += tok.in_table;
      s.colored += colored;
      s.large_font += large;
      const PageSize& ps = d.pages.at(static_cast<std::size_t>(tok.page));
      if (tok.bbox.x1 < 0 || tok.bbox.y1 < 0 || tok.bbox.x2 > ps.width || tok.bbox.y2 > ps.height) {
        s.boxes_in_range = false;
      }
      if (tok.label == "O") {
        tally("bold_given_O", tok.bold);
        tally("in_table_given_O", tok.in_table);
        tally("large_given_O", large);
        tally("color_given_O", colored);
        continue;
      }
      if (tok.label[0] != 'B') continue;
      const std::string cls = tok.label.substr(2);
      tally("bold_given_entity_initial", tok.bold);
      if (bold_prone.count(cls)) tally("p_bold_entity", tok.bold);
      if (table_prone.count(cls)) tally("p_table_amount", tok.in_table);
      if (large_prone.count(cls)) tally("p_largefont_name", large);
      if (color_prone.count(cls)) tally("p_color_total", colored);
    }
  }
  return s;
}

}  // namespace ielab
