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

#ifndef IELAB_ADAM_HPP_
#define IELAB_ADAM_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "ielab/tensor.hpp"

namespace ielab {

struct AdamConfig {
  double lr = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moment estimates for one parameter list. m and v are created lazily on the
// first step, shaped like the parameters.
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

// Bias-corrected Adam with a constant learning rate.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state);

// Reads gradients straight from a backward pass; parameters that received no
// gradient are updated with g = 0.
void adam_step(std::span<Tensor* const> params, const Gradients& grads, AdamState& state);

}  // namespace ielab

#endif  // IELAB_ADAM_HPP_
