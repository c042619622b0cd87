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

#include "ielab/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ielab/error.hpp"
#include "ielab/stats.hpp"

namespace ielab {

using nlohmann::json;

json ParamBreakdown::to_json() const {
  json c = json::array();
  for (const auto& [name, n] : components) c.push_back({{"name", name}, {"count", n}});
  return {{"mode", std::string(to_string(mode))}, {"components", c}, {"total", total}};
}

ParamBreakdown count_parameters(const ModelSpec& spec,
                                const std::array<int, kNumStyleFeatures>& style_sizes) {
  spec.validate();
  const auto h = static_cast<std::size_t>(spec.encoder.hidden);
  const auto ff = static_cast<std::size_t>(spec.encoder.ff_dim);
  const auto labels = static_cast<std::size_t>(spec.encoder.label_count);
  auto linear = [](std::size_t in, std::size_t out) { return in * out + out; };

  ParamBreakdown b;
  b.mode = spec.fusion;
  auto add = [&b](std::string name, std::size_t n) { b.components.emplace_back(std::move(name), n); };
  add("embed.word", static_cast<std::size_t>(spec.encoder.word_vocab) * h);
  add("embed.pos1d", static_cast<std::size_t>(spec.encoder.max_seq_len) * h);
  add("embed.pos2d", 6 * static_cast<std::size_t>(kCoordVocab) * h);
  add("embed.ln", 2 * h);
  const auto layers = static_cast<std::size_t>(spec.encoder.layers);
  add("encoder.attention", layers * (4 * linear(h, h) + 2 * h));
  add("encoder.ffn", layers * (linear(h, ff) + linear(ff, h) + 2 * h));
  if (uses_style(spec.fusion)) {
    std::size_t n = 0;
    for (StyleFeature f : spec.features) {
      n += static_cast<std::size_t>(style_sizes[static_cast<std::size_t>(f)]) * spec.style_width();
    }
    add("style.tables", n);
  }
  if (spec.fusion == FusionMode::kImage) {
    std::size_t n = 0;
    auto cin = static_cast<std::size_t>(spec.image.raster_channels);
    const auto k = static_cast<std::size_t>(spec.image.kernel);
    for (int c : spec.image.backbone_channels) {
      const auto cout = static_cast<std::size_t>(c);
      n += cout * cin * k * k + cout;
      cin = cout;
    }
    add("image.backbone", n);
    add("image.proj", linear(static_cast<std::size_t>(spec.image.pooled_width()), h));
  }
  add("head", linear(spec.head_width(), labels));
  for (const auto& [name, n] : b.components) b.total += n;
  return b;
}

std::vector<ParamBreakdown> count_all_modes(const ModelSpec& spec,
                                            const std::array<int, kNumStyleFeatures>& style_sizes) {
  std::vector<ParamBreakdown> out;
  for (FusionMode m : {FusionMode::kBaseline, FusionMode::kStyleSum, FusionMode::kStyleConcat,
                       FusionMode::kImage}) {
    ModelSpec s = spec;
    s.fusion = m;
    out.push_back(count_parameters(s, style_sizes));
  }
  return out;
}

double percent_of(double delta, double base) { return 100.0 * delta / base; }

std::string format_param_table(std::span<const ParamBreakdown> rows) {
  std::size_t base = 0;
  for (const auto& r : rows) {
    if (r.mode == FusionMode::kBaseline) base = r.total;
  }
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %15s %9s %14s %10s\n", "mode", "params", "(M)",
                "delta", "delta %");
  os << line;
  for (const auto& r : rows) {
    const double delta = static_cast<double>(r.total) - static_cast<double>(base);
    std::snprintf(line, sizeof line, "%-14s %15zu %9.2f %+14.0f %+9.3f%%\n",
                  std::string(to_string(r.mode)).c_str(), r.total,
                  static_cast<double>(r.total) / 1e6, delta,
                  base ? percent_of(delta, static_cast<double>(base)) : 0.0);
    os << line;
  }
  return os.str();
}

ModelSpec full_scale_spec() {
  ModelSpec s;
  s.encoder.hidden = 768;
  s.encoder.layers = 12;
  s.encoder.heads = 12;
  s.encoder.ff_dim = 3072;
  s.encoder.max_seq_len = 512;
  s.encoder.word_vocab = 30522;
  s.encoder.label_count = 25;
  s.style_dim = 64;
  return s;
}

namespace {

double round_to(double v, int decimals) {
  const double f = std::pow(10.0, decimals);
  return std::round(v * f) / f;
}

}  // namespace

PublishedCountCheck published_count_check(double image_params_m, double concat_params_m,
                                          double sum_params_m) {
  PublishedCountCheck t;
  t.image_params_m = image_params_m;
  t.concat_params_m = concat_params_m;
  t.sum_params_m = sum_params_m;
  t.more_pct = 100.0 * (image_params_m / concat_params_m - 1.0);
  t.less_pct = 100.0 * (1.0 - concat_params_m / image_params_m);
  t.sum_minus_concat_m = sum_params_m - concat_params_m;
  t.more_matches = round_to(t.more_pct, 1) == t.claimed_more_pct;
  t.less_matches = round_to(t.less_pct, 1) == t.claimed_less_pct;
  return t;
}

std::string PublishedCountCheck::format() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "image vs concat: %.2f/%.2f - 1 = %.2f%% (claimed %.1f%%: %s)\n"
                "concat vs image: 1 - %.2f/%.2f = %.2f%% (claimed %.1f%%: %s)\n"
                "style-sum total exceeds concat total by %.2fM\n",
                image_params_m, concat_params_m, more_pct, claimed_more_pct,
                more_matches ? "consistent" : "inconsistent", concat_params_m, image_params_m,
                less_pct, claimed_less_pct, less_matches ? "consistent" : "inconsistent",
                sum_minus_concat_m);
  return buf;
}

json PublishedCountCheck::to_json() const {
  return {{"more_pct", more_pct},         {"less_pct", less_pct},
          {"more_matches", more_matches}, {"less_matches", less_matches},
          {"sum_minus_concat_m", sum_minus_concat_m}};
}

// ---- Permutation importance ------------------------------------------------

std::vector<PreparedDoc> permute_feature(std::span<const PreparedDoc> docs, StyleFeature feature,
                                         Rng& rng) {
  const auto f = static_cast<std::size_t>(feature);
  std::vector<int> values;
  for (const auto& d : docs) {
    values.insert(values.end(), d.input.style_ids[f].begin(), d.input.style_ids[f].end());
  }
  std::shuffle(values.begin(), values.end(), rng);
  std::vector<PreparedDoc> out(docs.begin(), docs.end());
  std::size_t k = 0;
  for (auto& d : out) {
    for (int& v : d.input.style_ids[f]) v = values[k++];
  }
  return out;
}

std::vector<PreparedDoc> permute_feature(std::span<const PreparedDoc> docs,
                                         std::string_view feature, Rng& rng) {
  return permute_feature(docs, parse_feature(feature), rng);
}

json Importance::to_json() const {
  return {{"feature", std::string(feature_name(feature))},
          {"intact_f1", intact_f1},
          {"permuted_f1", permuted_f1},
          {"delta_mean", delta_mean},
          {"delta_std", delta_std},
          {"repeats", permuted_f1.size()},
          {"seed", seed}};
}

Importance permutation_importance(const TaggerModel& model, std::span<const PreparedDoc> docs,
                                  const LabelVocabulary& labels, const TrainConfig& cfg,
                                  StyleFeature feature, int repeats, std::uint64_t seed) {
  if (!uses_style(model.spec().fusion)) {
    throw ContractError("permutation importance needs a style model; this one is " +
                        std::string(to_string(model.spec().fusion)) +
                        " and has no style input to permute");
  }
  if (repeats < 1) throw ConfigError("permutation importance: repeats must be >= 1");
  Importance imp;
  imp.feature = feature;
  imp.seed = seed;
  imp.intact_f1 = evaluate(model, docs, labels, cfg).weighted_f1;
  std::vector<double> deltas;
  for (int r = 0; r < repeats; ++r) {
    Rng rng = make_rng(seed, "permute." + std::string(feature_name(feature)),
                       static_cast<std::uint64_t>(r));
    const auto permuted = permute_feature(docs, feature, rng);
    const double f1 = evaluate(model, permuted, labels, cfg).weighted_f1;
    imp.permuted_f1.push_back(f1);
    deltas.push_back(imp.intact_f1 - f1);
  }
  imp.delta_mean = mean(deltas);
  imp.delta_std = population_std(deltas);
  return imp;
}

std::vector<StyleFeature> rank_features(std::span<const Importance> results) {
  std::vector<Importance> sorted(results.begin(), results.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const Importance& a, const Importance& b) {
    return a.delta_mean > b.delta_mean;
  });
  std::vector<StyleFeature> out;
  for (const auto& i : sorted) out.push_back(i.feature);
  return out;
}

CvResult feature_subset_run(std::span<const DocumentRecord> corpus,
                            std::vector<StyleFeature> subset, ModelSpec spec,
                            const TrainConfig& cfg, const BucketingConfig& bucketing,
                            const CvOptions& options) {
  if (subset.empty()) {
    throw ConfigError("feature subset is empty; run a BASELINE model instead");
  }
  std::sort(subset.begin(), subset.end());
  subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
  if (!uses_style(spec.fusion)) spec.fusion = FusionMode::kStyleConcat;
  spec.features = std::move(subset);
  return cross_validate(corpus, spec, cfg, bucketing, options);
}

}  // namespace ielab
