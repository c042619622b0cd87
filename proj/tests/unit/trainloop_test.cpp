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
#include <random>
#include <set>

#include "ielab/error.hpp"
#include "ielab/synthdocs.hpp"
#include "ielab/trainloop.hpp"
#include "model_fixtures.hpp"

namespace ielab {
namespace {

using testing::kTinyStyleSizes;

TEST(Chunking, PlanFor900Tokens) {
  const auto plan = plan_chunks(900, 512, 100);
  ASSERT_EQ(plan.size(), 2u);
  EXPECT_EQ(plan[0], (ChunkSpan{0, 512}));
  EXPECT_EQ(plan[1], (ChunkSpan{412, 900}));
  const auto owners = chunk_owners(plan, 900);
  // The overlap [412, 512) splits at its middle.
  EXPECT_EQ(owners[411], 0u);
  EXPECT_EQ(owners[461], 0u);
  EXPECT_EQ(owners[462], 1u);
  EXPECT_EQ(owners[899], 1u);
}

TEST(Chunking, ShortSequencesFitOneWindow) {
  EXPECT_EQ(plan_chunks(400, 512, 100), (std::vector<ChunkSpan>{{0, 400}}));
  EXPECT_EQ(plan_chunks(512, 512, 100), (std::vector<ChunkSpan>{{0, 512}}));
  const std::vector<ChunkSpan> one = {{0, 400}};
  for (std::size_t o : chunk_owners(one, 400)) EXPECT_EQ(o, 0u);
}

TEST(Chunking, OwnerFollowsEdgeDistance) {
  const auto owners = chunk_owners(plan_chunks(900, 512, 100), 900);
  EXPECT_EQ(owners[450], 0u);  // 61 from the end of chunk 0, 38 into chunk 1
  EXPECT_EQ(owners[500], 1u);  // 11 vs 88
}

TEST(Chunking, FuzzedPlansCoverEveryTokenOnce) {
  for (std::size_t T = 1; T <= 3000; ++T) {
    const auto plan = plan_chunks(T, 512, 100);
    ASSERT_EQ(plan.front().start, 0u);
    ASSERT_EQ(plan.back().end, T);
    for (std::size_t c = 0; c < plan.size(); ++c) {
      ASSERT_LE(plan[c].end - plan[c].start, 512u);
      if (c > 0) {
        ASSERT_EQ(plan[c].start, plan[c - 1].start + 412);
      }
    }
    const auto owners = chunk_owners(plan, T);
    for (std::size_t i = 0; i < T; ++i) {
      ASSERT_GE(i, plan[owners[i]].start);
      ASSERT_LT(i, plan[owners[i]].end);
    }
  }
  EXPECT_THROW(plan_chunks(10, 100, 100), ConfigError);
  const std::vector<ChunkSpan> gap = {{0, 5}, {6, 10}};
  EXPECT_THROW(chunk_owners(gap, 10), ContractError);
}

TEST(Chunking, PredictionsMatchUnchunkedForShortDocuments) {
  ModelSpec spec = testing::tiny_spec(FusionMode::kStyleConcat);
  spec.encoder.max_seq_len = 512;
  const TaggerModel model(spec, kTinyStyleSizes);
  TrainConfig cfg;
  std::mt19937_64 gen(3);
  for (std::size_t T : {1u, 7u, 100u, 512u}) {
    PreparedDoc doc;
    doc.input = testing::random_input(T, 12, 5, kTinyStyleSizes, gen);
    const Tensor p = model.probabilities(doc.input, {});
    std::vector<int> direct(T);
    for (std::size_t i = 0; i < T; ++i) {
      const double* row = p.data().data() + i * 5;
      direct[i] = static_cast<int>(std::max_element(row, row + 5) - row);
    }
    EXPECT_EQ(predict_labels(model, doc, cfg), direct) << "T=" << T;
  }
  PreparedDoc longdoc;
  longdoc.input = testing::random_input(900, 12, 5, kTinyStyleSizes, gen);
  for (std::size_t i = 0; i < 900; ++i) longdoc.input.pos1d_ids[i] = static_cast<int>(i % 512);
  EXPECT_EQ(predict_labels(model, longdoc, cfg).size(), 900u);
}

TEST(Chunking, AggregationReadsOwningChunk) {
  ChunkProbabilities a{{0, 3}, Tensor::matrix({{1, 0}, {1, 0}, {1, 0}})};
  ChunkProbabilities b{{1, 4}, Tensor::matrix({{0, 1}, {0, 1}, {0, 1}})};
  const std::vector<ChunkProbabilities> chunks = {a, b};
  // Token 1: margin 1 in a, 0 in b. Token 2: margin 0 in a, 1 in b.
  EXPECT_EQ(aggregate_chunk_predictions(chunks, 4), (std::vector<int>{0, 0, 1, 1}));
}

TEST(Augmentation, TokenReplacementRateAndRange) {
  std::mt19937_64 gen(4);
  const ModelInput in = testing::random_input(5000, 12, 5, kTinyStyleSizes, gen);
  Rng rng(5);
  const ModelInput out = augment_tokens(in, 0.1, 50, rng);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    ASSERT_GE(out.word_ids[i], 2);
    ASSERT_LT(out.word_ids[i], 50);
    changed += out.word_ids[i] != in.word_ids[i];
  }
  EXPECT_NEAR(static_cast<double>(changed) / 5000.0, 0.1 * 48.0 / 48.0, 0.02);
  Rng again(5);
  EXPECT_EQ(augment_tokens(in, 0.1, 50, again), out);
  EXPECT_EQ(augment_tokens(in, 0.0, 50, rng), in);
}

TEST(Augmentation, BboxJitterClosedForm) {
  ModelInput in;
  in.word_ids = {5};
  in.x1_ids = {100};
  in.x2_ids = {300};
  in.y1_ids = {990};
  in.y2_ids = {1000};
  in.w_ids = {200};
  in.h_ids = {10};
  const ModelInput out = jitter_bboxes(in, 7, 5, 1.05);
  EXPECT_EQ(out.x1_ids[0], 87);   // (100-500)*1.05+500+7
  EXPECT_EQ(out.x2_ids[0], 297);  // (300-500)*1.05+500+7
  EXPECT_EQ(out.y1_ids[0], 1000);
  EXPECT_EQ(out.y2_ids[0], 1000);
  EXPECT_EQ(out.w_ids[0], 210);
  EXPECT_EQ(out.h_ids[0], 0);
}

TEST(Folds, PartitionIsDisjointAndCovering) {
  const FoldPlan plan = plan_folds(103, 5, 0.1, 42);
  ASSERT_EQ(plan.folds.size(), 5u);
  std::multiset<std::size_t> tests;
  for (const auto& f : plan.folds) {
    std::set<std::size_t> seen;
    for (auto* part : {&f.train, &f.val, &f.test}) {
      for (std::size_t i : *part) EXPECT_TRUE(seen.insert(i).second);
    }
    EXPECT_EQ(seen.size(), 103u);
    EXPECT_GE(f.test.size(), 20u);
    EXPECT_LE(f.test.size(), 21u);
    EXPECT_EQ(f.val.size(), static_cast<std::size_t>(std::lround(0.1 * (103 - f.test.size()))));
    tests.insert(f.test.begin(), f.test.end());
  }
  EXPECT_EQ(tests.size(), 103u);
  EXPECT_EQ(std::set<std::size_t>(tests.begin(), tests.end()).size(), 103u);
  EXPECT_EQ(plan_folds(103, 5, 0.1, 42).folds[2].test, plan.folds[2].test);
  EXPECT_THROW(plan_folds(3, 5, 0.1, 1), ConfigError);
}

TEST(Folds, TenDocumentsGiveTwoPerTestFold) {
  for (const auto& f : plan_folds(10, 5, 0.1, 7).folds) EXPECT_EQ(f.test.size(), 2u);
}

TEST(Training, BestEpochPrefersEarliest) {
  EXPECT_EQ(best_epoch_of(std::vector<double>{0.2, 0.5, 0.5, 0.4}), 1);
  EXPECT_THROW(best_epoch_of(std::vector<double>{}), ContractError);
}

TEST(Training, LossDecreasesAndRunIsDeterministic) {
  GeneratorConfig g;
  g.n_docs = 30;
  g.seed = 3;
  const auto docs = generate_corpus(g);
  ModelSpec spec;
  spec.fusion = FusionMode::kStyleConcat;
  spec.encoder.hidden = 16;
  spec.encoder.ff_dim = 32;
  spec.style_dim = 4;
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.epochs = 4;
  cfg.folds = 3;
  cfg.seed = 9;
  const CvResult a = cross_validate(docs, spec, cfg, BucketingConfig{});
  const CvResult b = cross_validate(docs, spec, cfg, BucketingConfig{});
  EXPECT_EQ(a.per_fold, b.per_fold);
  EXPECT_EQ(a.folds[1].training.train_loss, b.folds[1].training.train_loss);
  for (const auto& f : a.folds) {
    EXPECT_LT(f.training.train_loss.back(), f.training.train_loss.front());
    EXPECT_EQ(f.training.best_val_f1,
              f.training.val_trace[static_cast<std::size_t>(f.training.best_epoch)]);
  }
  double m = 0;
  for (double v : a.per_fold) m += v / 3.0;
  EXPECT_NEAR(a.mean, m, 1e-15);
}

TEST(Training, ThreadCountDoesNotChangeResults) {
  GeneratorConfig g;
  g.n_docs = 12;
  g.seed = 4;
  const auto docs = generate_corpus(g);
  ModelSpec spec;
  spec.fusion = FusionMode::kStyleSum;
  spec.encoder.hidden = 8;
  spec.encoder.layers = 1;
  spec.encoder.ff_dim = 8;
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.epochs = 2;
  cfg.folds = 3;
  cfg.seed = 2;
  CvOptions one, three;
  one.threads = 1;
  three.threads = 3;
  const CvResult a = cross_validate(docs, spec, cfg, BucketingConfig{}, one);
  const CvResult b = cross_validate(docs, spec, cfg, BucketingConfig{}, three);
  EXPECT_EQ(a.per_fold, b.per_fold);
  for (std::size_t f = 0; f < 3; ++f) {
    EXPECT_EQ(a.folds[f].training.train_loss, b.folds[f].training.train_loss);
  }
}

TEST(Training, ConfigValidation) {
  TrainConfig cfg;
  cfg.chunk_overlap = 600;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.folds = 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.lr = 3e-4;
  cfg.seed = 12;
  const TrainConfig back = train_config_from_json(to_json(cfg));
  EXPECT_EQ(back.lr, 3e-4);
  EXPECT_EQ(back.seed, 12u);
}

}  // namespace
}  // namespace ielab
