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

#include <random>

#include "ielab/error.hpp"
#include "ielab/metrics.hpp"

namespace ielab {
namespace {

using Tags = std::vector<std::string>;

std::vector<EntitySpan> random_spans(std::mt19937_64& gen, std::size_t length) {
  static const char* kClasses[] = {"A", "B", "DATE", "TOTAL"};
  std::vector<EntitySpan> out;
  std::size_t i = 0;
  while (i < length) {
    i += gen() % 3;  // gap, possibly zero: adjacent spans
    if (i >= length) break;
    const std::size_t len = 1 + gen() % 4;
    const std::size_t end = std::min(length, i + len);
    out.push_back({i, end, kClasses[gen() % 4]});
    i = end;
  }
  return out;
}

TEST(Iob, DecodeExamples) {
  EXPECT_EQ(decode_iob(Tags{"B-X", "I-X", "O"}), (std::vector<EntitySpan>{{0, 2, "X"}}));
  EXPECT_EQ(decode_iob(Tags{"B-X", "B-X"}),
            (std::vector<EntitySpan>{{0, 1, "X"}, {1, 2, "X"}}));
  EXPECT_EQ(decode_iob(Tags{"O", "I-X"}), (std::vector<EntitySpan>{{1, 2, "X"}}));
  EXPECT_EQ(decode_iob(Tags{"B-X", "I-Y", "I-Y"}),
            (std::vector<EntitySpan>{{0, 1, "X"}, {1, 3, "Y"}}));
  try {
    decode_iob(Tags{"O", "B-X", "X-1"});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("index 2"), std::string::npos);
  }
}

TEST(Iob, RoundTripRandomSpanSets) {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t length = 1 + gen() % 40;
    const auto spans = random_spans(gen, length);
    EXPECT_EQ(decode_iob(encode_iob(spans, length)), spans);
  }
  EXPECT_THROW(encode_iob(std::vector<EntitySpan>{{0, 2, "A"}, {1, 3, "B"}}, 4), ValidationError);
}

TEST(Scores, HandComputedWeightedF1) {
  // A: tp 1, fp 1 (f1 2/3, support 1). B: tp 1, fn 1 (f1 2/3, support 2).
  const std::vector<Tags> gold = {{"B-A", "O", "B-B", "O", "B-B"}};
  const std::vector<Tags> pred = {{"B-A", "B-A", "B-B", "O", "O"}};
  const ClassReport r = entity_scores(pred, gold);
  EXPECT_EQ(r.classes.at("A").tp, 1u);
  EXPECT_EQ(r.classes.at("A").fp, 1u);
  EXPECT_EQ(r.classes.at("B").fn, 1u);
  EXPECT_NEAR(r.classes.at("A").f1, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.classes.at("B").f1, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.weighted_f1, 2.0 / 3.0, 1e-15);
}

TEST(Scores, PerfectEmptyAndUnsupported) {
  const std::vector<Tags> gold = {{"B-A", "I-A", "O", "B-B"}, {"O", "B-C"}};
  EXPECT_EQ(entity_scores(gold, gold).weighted_f1, 1.0);
  const std::vector<Tags> none = {{"O", "O", "O", "O"}, {"O", "O"}};
  EXPECT_EQ(entity_scores(none, gold).weighted_f1, 0.0);
  const ClassReport empty = entity_scores(none, none);
  EXPECT_EQ(empty.weighted_f1, 0.0);
  EXPECT_TRUE(empty.classes.empty());
  EXPECT_TRUE(empty.to_json().contains("note"));
  const std::vector<Tags> extra = {{"B-A", "I-A", "B-Z", "B-B"}, {"O", "B-C"}};
  const ClassReport r = entity_scores(extra, gold);
  EXPECT_EQ(r.weighted_f1, 1.0);
  EXPECT_EQ(r.unsupported, (std::vector<std::string>{"Z"}));
  EXPECT_THROW(entity_scores(extra, {gold[0]}), DimensionError);
}

TEST(Scores, SwapExchangesPrecisionAndRecall) {
  std::mt19937_64 gen(3);
  std::vector<Tags> a, b;
  for (int d = 0; d < 30; ++d) {
    const std::size_t n = 5 + gen() % 20;
    a.push_back(encode_iob(random_spans(gen, n), n));
    b.push_back(encode_iob(random_spans(gen, n), n));
  }
  const ClassReport ab = entity_scores(a, b), ba = entity_scores(b, a);
  for (const auto& [cls, s] : ab.classes) {
    EXPECT_DOUBLE_EQ(s.precision, ba.classes.at(cls).recall);
    EXPECT_DOUBLE_EQ(s.recall, ba.classes.at(cls).precision);
  }
  EXPECT_GE(ab.weighted_f1, 0.0);
  EXPECT_LE(ab.weighted_f1, 1.0);
}

}  // namespace
}  // namespace ielab
