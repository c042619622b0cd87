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

// One finite-difference case per differentiable operation, run on a
// caller-chosen seed.

#ifndef IELAB_TESTS_OP_GRADIENT_CASES_HPP_
#define IELAB_TESTS_OP_GRADIENT_CASES_HPP_

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ielab/ops.hpp"
#include "ielab/rng.hpp"
#include "ielab/stylefuse.hpp"
#include "test_support.hpp"

namespace ielab::testing {

struct OpGradCase {
  std::string name;
  double tolerance;
  std::function<GradCheckResult(std::uint64_t seed)> run;
};

inline std::vector<OpGradCase> op_gradient_cases() {
  constexpr double kTol = 1e-4;
  std::vector<OpGradCase> cases;
  auto add_case = [&cases](std::string name, double tol,
                           std::function<GradCheckResult(std::uint64_t)> run) {
    cases.push_back({std::move(name), tol, std::move(run)});
  };
  // Each case builds its inputs from its own generator so cases are
  // independent of the order they run in.
  auto unary = [&](std::string name, Shape shape, std::function<Tensor(const Tensor&)> op,
                   double lo = -1.0, double hi = 1.0, double tol = 1e-4) {
    add_case(name, tol, [=](std::uint64_t seed) {
      std::mt19937_64 gen(derive_seed(seed, name));
      Tensor a = random_tensor(shape, gen, lo, hi);
      return gradcheck({{"a", &a}}, [&] { return op(a); });
    });
  };
  auto binary = [&](std::string name, Shape sa, Shape sb,
                    std::function<Tensor(const Tensor&, const Tensor&)> op) {
    add_case(name, kTol, [=](std::uint64_t seed) {
      std::mt19937_64 gen(derive_seed(seed, name));
      Tensor a = random_tensor(sa, gen), b = random_tensor(sb, gen);
      return gradcheck({{"a", &a}, {"b", &b}}, [&] { return op(a, b); });
    });
  };

  binary("add", {3, 4}, {3, 4}, [](const Tensor& a, const Tensor& b) { return add(a, b); });
  binary("mul", {3, 4}, {3, 4}, [](const Tensor& a, const Tensor& b) { return mul(a, b); });
  unary("scale", {3, 4}, [](const Tensor& a) { return scale(a, -1.7); });
  unary("gelu", {3, 4}, [](const Tensor& a) { return gelu(a); }, -3.0, 3.0);
  binary("matmul", {3, 4}, {4, 2}, [](const Tensor& a, const Tensor& b) { return matmul(a, b); });
  binary("matmul_nt", {3, 4}, {5, 4},
         [](const Tensor& a, const Tensor& b) { return matmul_nt(a, b); });
  unary("transpose", {3, 4}, [](const Tensor& a) { return transpose(a); });
  add_case("linear", kTol, [](std::uint64_t seed) {
    std::mt19937_64 gen(derive_seed(seed, "linear"));
    Tensor x = random_tensor({3, 4}, gen), w = random_tensor({4, 2}, gen),
           b = random_tensor({2}, gen);
    return gradcheck({{"x", &x}, {"w", &w}, {"b", &b}}, [&] { return linear(x, w, b); });
  });
  binary("add_row_bias", {3, 4}, {4},
         [](const Tensor& a, const Tensor& b) { return add_row_bias(a, b); });
  binary("add_channel_bias", {2, 3, 3}, {2},
         [](const Tensor& a, const Tensor& b) { return add_channel_bias(a, b); });
  unary("sum", {3, 4}, [](const Tensor& a) { return sum(a); });
  unary("reshape", {3, 4}, [](const Tensor& a) { return reshape(a, {2, 6}); });
  unary("slice_cols", {3, 4}, [](const Tensor& a) { return slice_cols(a, 1, 3); });
  binary("concat_cols", {3, 4}, {3, 2}, [](const Tensor& a, const Tensor& b) {
    const Tensor parts[] = {a, b};
    return concat_cols(parts);
  });
  binary("stack_rows", {1, 4}, {1, 4}, [](const Tensor& a, const Tensor& b) {
    const Tensor rows[] = {a, b, a};
    return stack_rows(rows);
  });
  unary("softmax_rows", {3, 5}, [](const Tensor& a) { return softmax_rows(a); }, -2.0, 2.0);
  unary("softmax_rows_masked", {3, 5},
        [](const Tensor& a) { return softmax_rows(a, {true, false, true, true, false}); }, -2.0,
        2.0);
  add_case("softmax_rows_saturated", 1e-3, [](std::uint64_t seed) {
    std::mt19937_64 gen(derive_seed(seed, "softmax_rows_saturated"));
    Tensor x = add(Tensor::matrix({{30, 0, -30}, {12, 11, -25}}), random_tensor({2, 3}, gen));
    return gradcheck({{"x", &x}}, [&] { return softmax_rows(x); });
  });
  add_case("layer_norm", kTol, [](std::uint64_t seed) {
    std::mt19937_64 gen(derive_seed(seed, "layer_norm"));
    Tensor x = random_tensor({3, 5}, gen, -2, 2), g = random_tensor({5}, gen),
           b = random_tensor({5}, gen);
    return gradcheck({{"x", &x}, {"g", &g}, {"b", &b}}, [&] { return layer_norm(x, g, b); });
  });
  unary("cross_entropy_masked", {3, 5}, [](const Tensor& a) {
    return cross_entropy_masked(a, std::vector<int>{0, 3, 4}, {true, false, true});
  }, -2.0, 2.0);
  unary("embedding_lookup", {6, 3},
        [](const Tensor& a) { return embedding_lookup(a, std::vector<int>{1, 4, 1, 0}); });
  unary("dropout", {4, 5}, [](const Tensor& a) {
    Rng rng(99);
    return dropout(a, 0.4, rng, true);
  });
  binary("conv2d", {2, 6, 5}, {3, 2, 3, 3},
         [](const Tensor& a, const Tensor& k) { return conv2d(a, k, 2, 1); });
  unary("roi_align", {2, 5, 6},
        [](const Tensor& a) { return roi_align(a, GridBox{-20, 100, 640, 1000}, 3, 2); });
  return cases;
}

}  // namespace ielab::testing

#endif  // IELAB_TESTS_OP_GRADIENT_CASES_HPP_
