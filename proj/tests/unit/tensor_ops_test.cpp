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

#include <cmath>
#include <random>

#include "ielab/adam.hpp"
#include "ielab/error.hpp"
#include "ielab/ops.hpp"
#include "ielab/rng.hpp"
#include "ielab/tensor.hpp"
#include "op_gradient_cases.hpp"
#include "test_support.hpp"

namespace ielab {
namespace {

using testing::gradcheck;
using testing::random_tensor;

constexpr double kTol = 1e-4;

TEST(Tensor, ShapeAndAccess) {
  Tensor t = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(t.dim(0), 2u);
  EXPECT_EQ(t.dim(1), 3u);
  EXPECT_DOUBLE_EQ(t.at(1, 2), 6.0);
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  EXPECT_DOUBLE_EQ(Tensor::scalar(3.5).item(), 3.5);
}

TEST(Ops, MatmulMatchesDirectSum) {
  std::mt19937_64 gen(1);
  const Tensor a = random_tensor({3, 4}, gen), b = random_tensor({4, 5}, gen);
  const Tensor c = matmul(a, b);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 4; ++k) s += a.at(i, k) * b.at(k, j);
      EXPECT_NEAR(c.at(i, j), s, 1e-14);
    }
  }
  EXPECT_THROW(matmul(a, a), DimensionError);
}

TEST(Ops, SoftmaxRowsSumToOneAndRespectMask) {
  const Tensor x = Tensor::matrix({{1, 2, 3}, {1000, 0, -1000}});
  const Tensor p = softmax_rows(x);
  for (std::size_t r = 0; r < 2; ++r) {
    EXPECT_NEAR(p.at(r, 0) + p.at(r, 1) + p.at(r, 2), 1.0, 1e-15);
  }
  EXPECT_NEAR(p.at(0, 2), std::exp(3.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0)), 1e-15);
  const Tensor m = softmax_rows(x, {true, true, false});
  EXPECT_EQ(m.at(0, 2), 0.0);
  EXPECT_NEAR(m.at(0, 1), std::exp(2.0) / (std::exp(1.0) + std::exp(2.0)), 1e-15);
}

TEST(Ops, LayerNormNormalizesRows) {
  std::mt19937_64 gen(2);
  const Tensor x = random_tensor({3, 6}, gen, -3, 3);
  const Tensor y = layer_norm(x, Tensor({6}, 1.0), Tensor({6}, 0.0));
  for (std::size_t r = 0; r < 3; ++r) {
    double mu = 0, var = 0;
    for (std::size_t c = 0; c < 6; ++c) mu += y.at(r, c) / 6;
    for (std::size_t c = 0; c < 6; ++c) var += (y.at(r, c) - mu) * (y.at(r, c) - mu) / 6;
    EXPECT_NEAR(mu, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-9);
  }
}

TEST(Ops, GeluTanhForm) {
  const Tensor y = gelu(Tensor::vector({-2.0, 0.0, 1.0}));
  auto ref = [](double x) {
    return 0.5 * x * (1 + std::tanh(std::sqrt(2 / M_PI) * (x + 0.044715 * x * x * x)));
  };
  EXPECT_NEAR(y[0], ref(-2.0), 1e-15);
  EXPECT_EQ(y[1], 0.0);
  EXPECT_NEAR(y[2], ref(1.0), 1e-15);
}

TEST(Ops, CrossEntropyIgnoresMaskedTokens) {
  const Tensor logits = Tensor::matrix({{2, 0}, {0, 5}, {1, 1}});
  const Tensor l = cross_entropy_masked(logits, std::vector<int>{0, 0, 1}, {true, false, true});
  const double a = -std::log(std::exp(2.0) / (std::exp(2.0) + 1.0));
  const double c = std::log(2.0);
  EXPECT_NEAR(l.item(), (a + c) / 2, 1e-14);
}

TEST(Ops, DropoutInferenceIsIdentityAndTrainingRescales) {
  Rng rng(3);
  const Tensor x(Shape{1000}, 1.0);
  EXPECT_EQ(dropout(x, 0.3, rng, false).data()[5], 1.0);
  const Tensor y = dropout(x, 0.25, rng, true);
  std::size_t kept = 0;
  for (double v : y.data()) {
    if (v != 0.0) {
      ++kept;
      EXPECT_NEAR(v, 1.0 / 0.75, 1e-15);
    }
  }
  EXPECT_NEAR(static_cast<double>(kept) / 1000, 0.75, 0.05);
}

TEST(Ops, Conv2dMatchesDirectLoop) {
  std::mt19937_64 gen(4);
  const Tensor in = random_tensor({2, 5, 6}, gen), k = random_tensor({3, 2, 3, 3}, gen);
  const Tensor out = conv2d(in, k, 2, 1);
  ASSERT_EQ(out.shape(), (Shape{3, 3, 3}));
  for (std::size_t o = 0; o < 3; ++o) {
    for (std::size_t y = 0; y < 3; ++y) {
      for (std::size_t x = 0; x < 3; ++x) {
        double s = 0;
        for (std::size_t c = 0; c < 2; ++c) {
          for (int dy = 0; dy < 3; ++dy) {
            for (int dx = 0; dx < 3; ++dx) {
              const int iy = static_cast<int>(y) * 2 - 1 + dy, ix = static_cast<int>(x) * 2 - 1 + dx;
              if (iy < 0 || iy >= 5 || ix < 0 || ix >= 6) continue;
              s += in[(c * 5 + iy) * 6 + ix] * k[((o * 2 + c) * 3 + dy) * 3 + dx];
            }
          }
        }
        EXPECT_NEAR(out[(o * 3 + y) * 3 + x], s, 1e-13);
      }
    }
  }
}

// ---- Gradients -------------------------------------------------------------

class OpGradients : public ::testing::Test {
 protected:
  std::mt19937_64 gen{11};
};

TEST_F(OpGradients, CheckerFlagsAWrongGradient) {
  // mul(a, detach(a)) records only half of d(a^2)/da.
  Tensor a = random_tensor({3, 3}, gen);
  EXPECT_GT(gradcheck({{"a", &a}}, [&] { return mul(a, a.detach()); }).max_rel_error, 0.3);
}

TEST(OpGradientCases, EveryOperationMatchesFiniteDifferences) {
  for (const auto& c : testing::op_gradient_cases()) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto r = c.run(seed);
      EXPECT_LT(r.worst(), c.tolerance)
          << c.name << " seed " << seed << " (leaf " << r.worst_leaf << ")";
      EXPECT_GT(r.checked, 0u) << c.name;
    }
  }
}

TEST(Tape, BackwardOnlyOnceAndUnreachedLeavesAreZero) {
  Tensor a = Tensor::vector({1, 2}), b = Tensor::vector({3, 4});
  Tape tape;
  TapeScope scope(tape);
  tape.watch(a);
  tape.watch(b);
  const Tensor loss = sum(mul(a, a));
  const Gradients g = tape.backward(loss);
  EXPECT_DOUBLE_EQ(g.of(a)[1], 4.0);
  EXPECT_TRUE(g.view(b).empty());
  EXPECT_EQ(g.of(b)[0], 0.0);
  EXPECT_THROW(tape.backward(loss), ContractError);
}

TEST(Tape, NothingRecordedWithoutScope) {
  Tensor a = Tensor::vector({1, 2});
  const Tensor y = mul(a, a);
  EXPECT_FALSE(y.node().has_value());
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // With bias correction the first update is lr * g / (|g| + eps').
  Tensor p = Tensor::vector({1.0, -1.0});
  AdamState st;
  st.config.lr = 0.1;
  Tensor* params[] = {&p};
  const Tensor grads[] = {Tensor::vector({0.5, -2.0})};
  adam_step(params, grads, st);
  EXPECT_NEAR(p[0], 0.9, 1e-7);
  EXPECT_NEAR(p[1], -0.9, 1e-7);
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, SecondStepMatchesClosedForm) {
  Tensor p = Tensor::vector({0.0});
  AdamState st;
  st.config.lr = 0.01;
  Tensor* params[] = {&p};
  const double g1 = 1.0, g2 = -3.0;
  adam_step(params, std::vector<Tensor>{Tensor::vector({g1})}, st);
  adam_step(params, std::vector<Tensor>{Tensor::vector({g2})}, st);
  const double m1 = 0.1 * g1, v1 = 0.001 * g1 * g1;
  const double m2 = 0.9 * m1 + 0.1 * g2, v2 = 0.999 * v1 + 0.001 * g2 * g2;
  const double step1 = 0.01 * (m1 / 0.1) / (std::sqrt(v1 / 0.001) + 1e-8);
  const double step2 = 0.01 * (m2 / (1 - 0.81)) / (std::sqrt(v2 / (1 - 0.999 * 0.999)) + 1e-8);
  EXPECT_NEAR(p[0], -step1 - step2, 1e-12);
}

TEST(Adam, FiveStepsOnQuadraticMatchReference) {
  // f(p) = 0.5 * (p - 3)^2, so g = p - 3. The reference keeps its own moments.
  Tensor p = Tensor::vector({0.0, 10.0});
  AdamState st;
  st.config.lr = 0.1;
  Tensor* params[] = {&p};
  double ref[2] = {0.0, 10.0}, m[2] = {0, 0}, v[2] = {0, 0};
  for (int t = 1; t <= 5; ++t) {
    adam_step(params, std::vector<Tensor>{Tensor::vector({p[0] - 3.0, p[1] - 3.0})}, st);
    for (int i = 0; i < 2; ++i) {
      const double g = ref[i] - 3.0;
      m[i] = 0.9 * m[i] + 0.1 * g;
      v[i] = 0.999 * v[i] + 0.001 * g * g;
      const double mh = m[i] / (1 - std::pow(0.9, t)), vh = v[i] / (1 - std::pow(0.999, t));
      ref[i] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  EXPECT_NEAR(p[0], ref[0], 1e-12);
  EXPECT_NEAR(p[1], ref[1], 1e-12);
  EXPECT_EQ(st.step, 5);
}

TEST(Adam, ZeroGradientLeavesParameterButCountsStep) {
  Tensor p = Tensor::vector({1.5, -2.5});
  AdamState st;
  st.config.lr = 0.1;
  Tensor* params[] = {&p};
  adam_step(params, std::vector<Tensor>{Tensor::vector({0.0, 0.0})}, st);
  EXPECT_EQ(p[0], 1.5);
  EXPECT_EQ(p[1], -2.5);
  EXPECT_EQ(st.step, 1);
}

TEST(Ops, Conv2dOneHotWithOnesKernelGivesPlateau) {
  Tensor in({1, 7, 7}, 0.0);
  in[3 * 7 + 3] = 1.0;
  const Tensor out = conv2d(in, Tensor({1, 1, 3, 3}, 1.0), 1, 1);
  for (std::size_t y = 0; y < 7; ++y) {
    for (std::size_t x = 0; x < 7; ++x) {
      const bool inside = y >= 2 && y <= 4 && x >= 2 && x <= 4;
      EXPECT_EQ(out[y * 7 + x], inside ? 1.0 : 0.0);
    }
  }
}

TEST(Ops, Conv2dIdentityKernel) {
  std::mt19937_64 gen(5);
  const Tensor in = random_tensor({2, 4, 5}, gen);
  Tensor k({2, 2, 1, 1}, 0.0);
  k[0] = 1.0;
  k[3] = 1.0;
  const Tensor out = conv2d(in, k, 1, 0);
  ASSERT_EQ(out.shape(), in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) EXPECT_EQ(out[i], in[i]);
}

TEST(Ops, DropoutZeroFractionOverManyElements) {
  Rng rng(derive_seed(11, "dropout-rate"));
  const Tensor y = dropout(Tensor(Shape{100000}, 1.0), 0.3, rng, true);
  std::size_t zeros = 0;
  for (double v : y.data()) zeros += v == 0.0;
  EXPECT_NEAR(static_cast<double>(zeros) / 1e5, 0.3, 0.01);
}

TEST(Ops, CrossEntropyOfUniformLogitsIsLogC) {
  const Tensor logits(Shape{4, 6}, 0.25);
  const Tensor l = cross_entropy_masked(logits, std::vector<int>{0, 5, 2, 3}, {true, true, true, true});
  EXPECT_NEAR(l.item(), std::log(6.0), 1e-14);
}

TEST(Ops, CrossEntropyMatchesDirectFormula) {
  std::mt19937_64 gen(6);
  const Tensor logits = random_tensor({4, 3}, gen, -2, 2);
  const std::vector<int> targets{2, 0, 1, 1};
  const Tensor l = cross_entropy_masked(logits, targets, {true, true, true, true});
  double ref = 0;
  for (std::size_t r = 0; r < 4; ++r) {
    double z = 0;
    for (std::size_t c = 0; c < 3; ++c) z += std::exp(logits.at(r, c));
    ref -= std::log(std::exp(logits.at(r, targets[r])) / z) / 4;
  }
  EXPECT_NEAR(l.item(), ref, 1e-14);
}

TEST(Ops, SoftmaxIsShiftInvariant) {
  std::mt19937_64 gen(8);
  const Tensor x = random_tensor({3, 5}, gen, -4, 4);
  const Tensor a = softmax_rows(x);
  const Tensor b = softmax_rows(add(x, Tensor({3, 5}, 123.0)));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
}

TEST(Ops, RepeatedEmbeddingIdAccumulatesGradient) {
  std::mt19937_64 gen(9);
  Tensor table = random_tensor({4, 3}, gen);
  Tape tape;
  TapeScope scope(tape);
  tape.watch(table);
  const std::vector<int> ids{0, 0};
  const Tensor loss = sum(embedding_lookup(table, ids));
  const Tensor g = tape.backward(loss).of(table);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(g.at(0, c), 2.0);
    for (std::size_t r = 1; r < 4; ++r) EXPECT_EQ(g.at(r, c), 0.0);
  }
}

TEST(Ops, ComposedMatmulLayerNormCrossEntropyGradient) {
  std::mt19937_64 gen(10);
  Tensor x = random_tensor({5, 4}, gen), w = random_tensor({4, 6}, gen);
  Tensor gamma = random_tensor({6}, gen, 0.5, 1.5), beta = random_tensor({6}, gen);
  const std::vector<int> targets{0, 3, 5, 1, 2};
  const std::vector<bool> mask{true, true, false, true, true};
  const auto r = testing::gradcheck(
      {{"x", &x}, {"w", &w}, {"gamma", &gamma}, {"beta", &beta}},
      [&] { return cross_entropy_masked(layer_norm(matmul(x, w), gamma, beta, 1e-5), targets, mask); });
  EXPECT_LT(r.worst(), 1e-4) << r.worst_leaf;
}

}  // namespace
}  // namespace ielab
