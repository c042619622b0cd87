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

#include "ielab/adam.hpp"

#include <cmath>
#include <string>

#include "ielab/error.hpp"

namespace ielab {

namespace {

void prepare(std::span<Tensor* const> params, AdamState& state) {
  if (state.m.empty() && state.v.empty()) {
    for (Tensor* p : params) {
      state.m.emplace_back(p->shape(), 0.0);
      state.v.emplace_back(p->shape(), 0.0);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam_step: state holds " + std::to_string(state.m.size()) +
                         " moments for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].shape() != params[i]->shape() || state.v[i].shape() != params[i]->shape()) {
      throw DimensionError("adam_step: moment shape " + shape_string(state.m[i].shape()) +
                           " vs parameter " + shape_string(params[i]->shape()));
    }
  }
}

void update_one(Tensor& p, std::span<const double> g, Tensor& m, Tensor& v, const AdamConfig& c,
                double bc1, double bc2) {
  auto pd = p.data();
  auto md = m.data();
  auto vd = v.data();
  const double lr_t = c.lr / bc1;
  const double inv_bc2 = 1.0 / bc2;
  for (std::size_t j = 0; j < pd.size(); ++j) {
    const double gj = g.empty() ? 0.0 : g[j];
    md[j] = c.beta1 * md[j] + (1.0 - c.beta1) * gj;
    vd[j] = c.beta2 * vd[j] + (1.0 - c.beta2) * gj * gj;
    pd[j] -= lr_t * md[j] / (std::sqrt(vd[j] * inv_bc2) + c.eps);
  }
}

}  // namespace

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state) {
  if (grads.size() != params.size()) {
    throw DimensionError("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i]->shape()) {
      throw DimensionError("adam_step: gradient shape " + shape_string(grads[i].shape()) +
                           " vs parameter " + shape_string(params[i]->shape()));
    }
  }
  prepare(params, state);
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    update_one(*params[i], grads[i].data(), state.m[i], state.v[i], state.config, bc1, bc2);
  }
}

void adam_step(std::span<Tensor* const> params, const Gradients& grads, AdamState& state) {
  prepare(params, state);
  std::vector<std::span<const double>> views;
  views.reserve(params.size());
  for (Tensor* p : params) views.push_back(grads.view(*p));
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    update_one(*params[i], views[i], state.m[i], state.v[i], state.config, bc1, bc2);
  }
}

}  // namespace ielab
