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

// Differentiable tensor operations. Each op computes its forward value
// eagerly and, when the active tape tracks one of its inputs, records a
// backward function on that tape.

#ifndef IELAB_OPS_HPP_
#define IELAB_OPS_HPP_

#include <span>
#include <vector>

#include "ielab/rng.hpp"
#include "ielab/tensor.hpp"

namespace ielab {

// [m x k] . [k x n]
Tensor matmul(const Tensor& a, const Tensor& b);
// [m x k] . [n x k]^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// x [T x in] . w [in x out] + b [out]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
// Adds a length-n vector to every row of x [T x n].
Tensor add_row_bias(const Tensor& x, const Tensor& bias);
// Adds bias[c] to every element of channel c of x [C x H x W].
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);
Tensor sum(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor concat_cols(std::span<const Tensor> parts);
// Flattens every input into one row of the result.
Tensor stack_rows(std::span<const Tensor> rows);

// Row-wise softmax over the last dimension, max-subtracted.
Tensor softmax_rows(const Tensor& x);
// Same, but columns whose mask entry is false receive exactly zero weight.
Tensor softmax_rows(const Tensor& x, const std::vector<bool>& column_mask);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-12);

// Tanh-form GELU: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
Tensor gelu(const Tensor& x);

Tensor embedding_lookup(const Tensor& table, std::span<const int> ids);

// Mean over positions with mask=true of -log softmax(logits)[target].
Tensor cross_entropy_masked(const Tensor& logits, std::span<const int> targets,
                            const std::vector<bool>& mask);

Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training);

// Cross-correlation of input [C_in x H x W] with kernels [C_out x C_in x k x k].
Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t stride,
              std::size_t padding);

}  // namespace ielab

#endif  // IELAB_OPS_HPP_
