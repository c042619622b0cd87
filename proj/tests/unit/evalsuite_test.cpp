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

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "ielab/error.hpp"
#include "ielab/evalsuite.hpp"
#include "ielab/synthdocs.hpp"
#include "model_fixtures.hpp"

namespace ielab {
namespace {

using testing::kTinyStyleSizes;
using testing::random_spec;
using testing::tiny_spec;

constexpr FusionMode kModes[] = {FusionMode::kBaseline, FusionMode::kStyleSum,
                                 FusionMode::kStyleConcat, FusionMode::kImage};

std::size_t element_count(const TaggerModel& m) {
  std::size_t n = 0;
  for (const auto& [name, t] : m.named_parameters()) n += t->size();
  return n;
}

TEST(ParamCount, ClosedFormMatchesConstructedModels) {
  std::mt19937_64 gen(5);
  for (FusionMode mode : kModes) {
    for (int trial = 0; trial < 20; ++trial) {
      const ModelSpec spec = random_spec(mode, gen);
      std::array<int, kNumStyleFeatures> sizes;
      for (int& v : sizes) v = std::uniform_int_distribution<int>(2, 9)(gen);
      const TaggerModel model(spec, sizes);
      const ParamBreakdown b = count_parameters(spec, sizes);
      ASSERT_EQ(b.total, element_count(model)) << to_string(mode) << " trial " << trial;
      std::size_t parts = 0;
      for (const auto& [name, n] : b.components) parts += n;
      EXPECT_EQ(parts, b.total);
    }
  }
}

TEST(ParamCount, FullScaleStyleDeltas) {
  const std::array<int, kNumStyleFeatures> sizes = {2, 6, 5, 2, 3};
  const ModelSpec full = full_scale_spec();
  const auto rows = count_all_modes(full, sizes);
  ASSERT_EQ(rows.size(), 4u);
  const std::size_t buckets = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  // Sum: one hidden-wide table per feature. Concat: 64-wide tables plus the
  // wider head input (5 * 64 columns into 25 labels).
  EXPECT_EQ(rows[1].total - rows[0].total, buckets * 768);
  EXPECT_EQ(rows[2].total - rows[0].total, buckets * 64 + 5 * 64 * 25);
  const double pct = percent_of(static_cast<double>(buckets * 768), 113.49e6);
  EXPECT_NEAR(pct, 0.0122, 5e-5);
  EXPECT_GE(pct, 0.005);
  EXPECT_LE(pct, 0.05);
  EXPECT_NE(format_param_table(rows).find("STYLE_CONCAT"), std::string::npos);
}

TEST(ParamCount, PublishedCountArithmetic) {
  const PublishedCountCheck t = published_count_check();
  EXPECT_NEAR(t.more_pct, (163.74 / 113.49 - 1.0) * 100.0, 1e-12);
  EXPECT_NEAR(t.less_pct, (1.0 - 113.49 / 163.74) * 100.0, 1e-12);
  EXPECT_EQ(std::round(t.more_pct * 100.0) / 100.0, 44.28);
  EXPECT_EQ(std::round(t.less_pct * 100.0) / 100.0, 30.69);
  EXPECT_TRUE(t.more_matches);
  EXPECT_TRUE(t.less_matches);
  EXPECT_NEAR(t.sum_minus_concat_m, 0.01, 1e-9);
  EXPECT_FALSE(published_count_check(170.0).more_matches);
}

TEST(ParamCount, SmallVocabularyDeltas) {
  const std::array<int, kNumStyleFeatures> sizes = {2, 9, 3, 2, 2};
  const auto rows = count_all_modes(full_scale_spec(), sizes);
  EXPECT_EQ(rows[1].total - rows[0].total, 13824u);  // 18 buckets x 768
  EXPECT_EQ(rows[2].total - rows[0].total, 18u * 64 + 5u * 64 * 25);
}

TEST(ParamCount, FullScaleModesAreOrdered) {
  const auto rows = count_all_modes(full_scale_spec(), {2, 6, 5, 2, 3});
  std::map<FusionMode, std::size_t> total;
  for (const auto& r : rows) total[r.mode] = r.total;
  EXPECT_LT(total[FusionMode::kBaseline], total[FusionMode::kStyleConcat]);
  EXPECT_LT(total[FusionMode::kStyleConcat], total[FusionMode::kStyleSum]);
  EXPECT_LT(total[FusionMode::kStyleSum], total[FusionMode::kImage]);
}

TEST(ParamCount, GrowsWithFeatureSubset) {
  ModelSpec spec = tiny_spec(FusionMode::kStyleConcat);
  spec.features = {StyleFeature::kBold};
  EXPECT_EQ(spec.head_width(), static_cast<std::size_t>(spec.encoder.hidden + spec.style_dim));
  std::size_t previous = count_parameters(spec, kTinyStyleSizes).total;
  for (std::size_t k = 2; k <= kNumStyleFeatures; ++k) {
    spec.features.assign(kAllStyleFeatures.begin(), kAllStyleFeatures.begin() + k);
    const std::size_t n = count_parameters(spec, kTinyStyleSizes).total;
    EXPECT_GT(n, previous) << k << " features";
    previous = n;
  }
}

std::vector<PreparedDoc> tiny_docs(std::size_t n, std::mt19937_64& gen) {
  const ModelSpec spec = tiny_spec(FusionMode::kStyleConcat);
  std::vector<PreparedDoc> docs;
  for (std::size_t i = 0; i < n; ++i) {
    PreparedDoc d;
    d.id = "d" + std::to_string(i);
    d.input = testing::random_input(3 + i % 4, spec.encoder.word_vocab,
                                    spec.encoder.label_count, kTinyStyleSizes, gen);
    docs.push_back(std::move(d));
  }
  return docs;
}

TEST(Permutation, ShufflesOneFeatureAcrossTheCorpus) {
  std::mt19937_64 gen(8);
  const auto docs = tiny_docs(6, gen);
  const auto f = static_cast<std::size_t>(StyleFeature::kFontSize);
  Rng a = make_rng(1, "perm"), b = make_rng(1, "perm");
  const auto p1 = permute_feature(docs, StyleFeature::kFontSize, a);
  const auto p2 = permute_feature(docs, "fontSize", b);
  std::vector<int> before, after;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    EXPECT_EQ(p1[i].input.style_ids[f], p2[i].input.style_ids[f]);
    EXPECT_EQ(p1[i].input.word_ids, docs[i].input.word_ids);
    EXPECT_EQ(p1[i].input.label_ids, docs[i].input.label_ids);
    for (std::size_t g = 0; g < kNumStyleFeatures; ++g) {
      EXPECT_EQ(p1[i].input.style_ids[g].size(), docs[i].input.style_ids[g].size());
      if (g != f) {
        EXPECT_EQ(p1[i].input.style_ids[g], docs[i].input.style_ids[g]);
      }
    }
    before.insert(before.end(), docs[i].input.style_ids[f].begin(),
                  docs[i].input.style_ids[f].end());
    after.insert(after.end(), p1[i].input.style_ids[f].begin(), p1[i].input.style_ids[f].end());
  }
  EXPECT_NE(before, after);
  std::sort(before.begin(), before.end());
  std::sort(after.begin(), after.end());
  EXPECT_EQ(before, after);
}

TEST(Permutation, ImportanceRequiresStyleModel) {
  std::mt19937_64 gen(9);
  const auto docs = tiny_docs(3, gen);
  const LabelVocabulary labels = make_label_vocabulary({"O", "B-A", "I-A", "B-B", "I-B"});
  TrainConfig cfg;
  cfg.max_seq_len = 8;
  cfg.chunk_overlap = 2;
  const TaggerModel baseline(tiny_spec(FusionMode::kBaseline), kTinyStyleSizes);
  EXPECT_THROW(permutation_importance(baseline, docs, labels, cfg, StyleFeature::kBold, 2, 1),
               ContractError);
  const TaggerModel concat(tiny_spec(FusionMode::kStyleConcat), kTinyStyleSizes);
  const Importance i1 =
      permutation_importance(concat, docs, labels, cfg, StyleFeature::kBold, 3, 11);
  const Importance i2 =
      permutation_importance(concat, docs, labels, cfg, StyleFeature::kBold, 3, 11);
  EXPECT_EQ(i1.permuted_f1, i2.permuted_f1);
  EXPECT_EQ(i1.permuted_f1.size(), 3u);
  EXPECT_THROW(permutation_importance(concat, docs, labels, cfg, StyleFeature::kBold, 0, 1),
               ConfigError);
}

TEST(Permutation, ConstantTableGivesZeroImportance) {
  std::mt19937_64 gen(12);
  const auto docs = tiny_docs(5, gen);
  const LabelVocabulary labels = make_label_vocabulary({"O", "B-A", "I-A", "B-B", "I-B"});
  TrainConfig cfg;
  cfg.max_seq_len = 8;
  cfg.chunk_overlap = 2;
  TaggerModel model(tiny_spec(FusionMode::kStyleConcat), kTinyStyleSizes);
  Tensor& table = model.style().tables[static_cast<std::size_t>(StyleFeature::kColor)];
  for (std::size_t r = 1; r < table.dim(0); ++r) {
    for (std::size_t c = 0; c < table.dim(1); ++c) table.at(r, c) = table.at(0, c);
  }
  const Importance imp =
      permutation_importance(model, docs, labels, cfg, StyleFeature::kColor, 3, 4);
  EXPECT_EQ(imp.delta_mean, 0.0);
  for (double f : imp.permuted_f1) EXPECT_EQ(f, imp.intact_f1);
}

TEST(Permutation, RankingIsStableOnTies) {
  std::vector<Importance> r(3);
  r[0].feature = StyleFeature::kColor;
  r[0].delta_mean = 0.1;
  r[1].feature = StyleFeature::kBold;
  r[1].delta_mean = 0.3;
  r[2].feature = StyleFeature::kInTable;
  r[2].delta_mean = 0.1;
  EXPECT_EQ(rank_features(r), (std::vector<StyleFeature>{StyleFeature::kBold, StyleFeature::kColor,
                                                         StyleFeature::kInTable}));
}

TEST(Subsets, EmptySubsetIsRejected) {
  EXPECT_THROW(feature_subset_run({}, {}, tiny_spec(FusionMode::kStyleSum), TrainConfig{},
                                  BucketingConfig{}),
               ConfigError);
}

TEST(Subsets, AllFeaturesEqualsDefaultStyleModel) {
  GeneratorConfig g;
  g.n_docs = 8;
  g.seed = 5;
  const auto docs = generate_corpus(g);
  ModelSpec spec = tiny_spec(FusionMode::kStyleConcat);
  spec.encoder.max_seq_len = 64;
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.epochs = 1;
  cfg.folds = 2;
  cfg.max_seq_len = 64;
  cfg.chunk_overlap = 16;
  cfg.seed = 3;
  const std::vector<StyleFeature> all(kAllStyleFeatures.begin(), kAllStyleFeatures.end());
  const CvResult a = feature_subset_run(docs, all, spec, cfg, BucketingConfig{});
  const CvResult b = cross_validate(docs, spec, cfg, BucketingConfig{});
  EXPECT_EQ(a.per_fold, b.per_fold);
  EXPECT_EQ(a.folds[0].spec, b.folds[0].spec);
}

}  // namespace
}  // namespace ielab
