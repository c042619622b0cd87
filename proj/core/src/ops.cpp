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

#include "ielab/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "ielab/error.hpp"

namespace ielab {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;
using ConstVec = Eigen::Map<const Eigen::VectorXd>;
using MutVec = Eigen::Map<Eigen::VectorXd>;

ConstMap as_mat(std::span<const double> d, std::size_t rows, std::size_t cols) {
  return ConstMap(d.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
MutMap as_mat(std::span<double> d, std::size_t rows, std::size_t cols) {
  return MutMap(d.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
ConstVec as_vec(std::span<const double> d) {
  return ConstVec(d.data(), static_cast<Eigen::Index>(d.size()));
}
MutVec as_vec(std::span<double> d) { return MutVec(d.data(), static_cast<Eigen::Index>(d.size())); }

Buffer copy_of(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         " tensor, got " + shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes differ: " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

void accumulate(std::span<double> dst, std::span<const double> src) {
  as_vec(dst) += as_vec(src);
}

std::size_t last_dim(const Tensor& t) { return t.shape().back(); }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  Tensor out(Shape{m, n});
  as_mat(out.data(), m, n).noalias() = as_mat(a.data(), m, k) * as_mat(b.data(), k, n);
  if (Tape* tape = recording_tape({&a, &b})) {
    Buffer sa = tape->tracks(b) ? copy_of(a) : Buffer{};
    Buffer sb = tape->tracks(a) ? copy_of(b) : Buffer{};
    tape->record(out, {&a, &b},
                 [sa = std::move(sa), sb = std::move(sb), m, k, n](std::span<const double> g,
                                                                   BackwardContext& ctx) {
                   auto gm = as_mat(g, m, n);
                   if (auto da = ctx.input_grad(0); !da.empty()) {
                     as_mat(da, m, k).noalias() += gm * as_mat(sb, k, n).transpose();
                   }
                   if (auto db = ctx.input_grad(1); !db.empty()) {
                     as_mat(db, k, n).noalias() += as_mat(sa, m, k).transpose() * gm;
                   }
                 });
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul_nt");
  require_rank(b, 2, "matmul_nt");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k) {
    throw DimensionError("matmul_nt: inner dimensions differ: " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()) + "^T");
  }
  Tensor out(Shape{m, n});
  as_mat(out.data(), m, n).noalias() = as_mat(a.data(), m, k) * as_mat(b.data(), n, k).transpose();
  if (Tape* tape = recording_tape({&a, &b})) {
    Buffer sa = tape->tracks(b) ? copy_of(a) : Buffer{};
    Buffer sb = tape->tracks(a) ? copy_of(b) : Buffer{};
    tape->record(out, {&a, &b},
                 [sa = std::move(sa), sb = std::move(sb), m, k, n](std::span<const double> g,
                                                                   BackwardContext& ctx) {
                   auto gm = as_mat(g, m, n);
                   if (auto da = ctx.input_grad(0); !da.empty()) {
                     as_mat(da, m, k).noalias() += gm * as_mat(sb, n, k);
                   }
                   if (auto db = ctx.input_grad(1); !db.empty()) {
                     as_mat(db, n, k).noalias() += gm.transpose() * as_mat(sa, m, k);
                   }
                 });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor out(Shape{n, m});
  as_mat(out.data(), n, m) = as_mat(a.data(), m, n).transpose();
  if (Tape* tape = recording_tape({&a})) {
    tape->record(out, {&a}, [m, n](std::span<const double> g, BackwardContext& ctx) {
      as_mat(ctx.input_grad(0), m, n) += as_mat(g, n, m).transpose();
    });
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank(x, 2, "linear");
  require_rank(w, 2, "linear");
  const std::size_t t = x.dim(0), in = x.dim(1), out_dim = w.dim(1);
  if (w.dim(0) != in || b.size() != out_dim) {
    throw DimensionError("linear: input " + shape_string(x.shape()) + " incompatible with weight " +
                         shape_string(w.shape()) + " and bias " + shape_string(b.shape()));
  }
  Tensor out(Shape{t, out_dim});
  auto om = as_mat(out.data(), t, out_dim);
  om.noalias() = as_mat(x.data(), t, in) * as_mat(w.data(), in, out_dim);
  om.rowwise() += as_vec(b.data()).transpose();
  if (Tape* tape = recording_tape({&x, &w, &b})) {
    Buffer sx = tape->tracks(w) ? copy_of(x) : Buffer{};
    Buffer sw = tape->tracks(x) ? copy_of(w) : Buffer{};
    tape->record(out, {&x, &w, &b},
                 [sx = std::move(sx), sw = std::move(sw), t, in, out_dim](
                     std::span<const double> g, BackwardContext& ctx) {
                   auto gm = as_mat(g, t, out_dim);
                   if (auto dx = ctx.input_grad(0); !dx.empty()) {
                     as_mat(dx, t, in).noalias() += gm * as_mat(sw, in, out_dim).transpose();
                   }
                   if (auto dw = ctx.input_grad(1); !dw.empty()) {
                     as_mat(dw, in, out_dim).noalias() += as_mat(sx, t, in).transpose() * gm;
                   }
                   if (auto db = ctx.input_grad(2); !db.empty()) {
                     as_vec(db) += gm.colwise().sum().transpose();
                   }
                 });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  as_vec(out.data()) = as_vec(a.data()) + as_vec(b.data());
  if (Tape* tape = recording_tape({&a, &b})) {
    tape->record(out, {&a, &b}, [](std::span<const double> g, BackwardContext& ctx) {
      if (auto da = ctx.input_grad(0); !da.empty()) accumulate(da, g);
      if (auto db = ctx.input_grad(1); !db.empty()) accumulate(db, g);
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  as_vec(out.data()) = as_vec(a.data()).cwiseProduct(as_vec(b.data()));
  if (Tape* tape = recording_tape({&a, &b})) {
    Buffer sa = tape->tracks(b) ? copy_of(a) : Buffer{};
    Buffer sb = tape->tracks(a) ? copy_of(b) : Buffer{};
    tape->record(out, {&a, &b},
                 [sa = std::move(sa), sb = std::move(sb)](std::span<const double> g,
                                                          BackwardContext& ctx) {
                   if (auto da = ctx.input_grad(0); !da.empty()) {
                     as_vec(da) += as_vec(g).cwiseProduct(as_vec(sb));
                   }
                   if (auto db = ctx.input_grad(1); !db.empty()) {
                     as_vec(db) += as_vec(g).cwiseProduct(as_vec(sa));
                   }
                 });
  }
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out(a.shape());
  as_vec(out.data()) = as_vec(a.data()) * s;
  if (Tape* tape = recording_tape({&a})) {
    tape->record(out, {&a}, [s](std::span<const double> g, BackwardContext& ctx) {
      as_vec(ctx.input_grad(0)) += as_vec(g) * s;
    });
  }
  return out;
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  require_rank(x, 2, "add_row_bias");
  const std::size_t t = x.dim(0), n = x.dim(1);
  if (bias.size() != n) {
    throw DimensionError("add_row_bias: bias " + shape_string(bias.shape()) + " vs rows of " +
                         shape_string(x.shape()));
  }
  Tensor out(x.shape());
  as_mat(out.data(), t, n) = as_mat(x.data(), t, n).rowwise() + as_vec(bias.data()).transpose();
  if (Tape* tape = recording_tape({&x, &bias})) {
    tape->record(out, {&x, &bias}, [t, n](std::span<const double> g, BackwardContext& ctx) {
      if (auto dx = ctx.input_grad(0); !dx.empty()) accumulate(dx, g);
      if (auto db = ctx.input_grad(1); !db.empty()) {
        as_vec(db) += as_mat(g, t, n).colwise().sum().transpose();
      }
    });
  }
  return out;
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  require_rank(x, 3, "add_channel_bias");
  const std::size_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
  if (bias.size() != c) {
    throw DimensionError("add_channel_bias: bias " + shape_string(bias.shape()) +
                         " vs channels of " + shape_string(x.shape()));
  }
  Tensor out(x.shape());
  as_mat(out.data(), c, hw) = as_mat(x.data(), c, hw).colwise() + as_vec(bias.data());
  if (Tape* tape = recording_tape({&x, &bias})) {
    tape->record(out, {&x, &bias}, [c, hw](std::span<const double> g, BackwardContext& ctx) {
      if (auto dx = ctx.input_grad(0); !dx.empty()) accumulate(dx, g);
      if (auto db = ctx.input_grad(1); !db.empty()) {
        as_vec(db) += as_mat(g, c, hw).rowwise().sum();
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  Tensor out = Tensor::scalar(as_vec(x.data()).sum());
  if (Tape* tape = recording_tape({&x})) {
    tape->record(out, {&x}, [](std::span<const double> g, BackwardContext& ctx) {
      as_vec(ctx.input_grad(0)).array() += g[0];
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_product(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " +
                         shape_string(shape));
  }
  Tensor out(std::move(shape), copy_of(x));
  if (Tape* tape = recording_tape({&x})) {
    tape->record(out, {&x}, [](std::span<const double> g, BackwardContext& ctx) {
      accumulate(ctx.input_grad(0), g);
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank(x, 2, "slice_cols");
  const std::size_t t = x.dim(0), n = x.dim(1);
  if (begin >= end || end > n) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") invalid for " + shape_string(x.shape()));
  }
  const std::size_t w = end - begin;
  Tensor out(Shape{t, w});
  as_mat(out.data(), t, w) =
      as_mat(x.data(), t, n).middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(w));
  if (Tape* tape = recording_tape({&x})) {
    tape->record(out, {&x}, [t, n, w, begin](std::span<const double> g, BackwardContext& ctx) {
      as_mat(ctx.input_grad(0), t, n).middleCols(static_cast<Eigen::Index>(begin),
                                                 static_cast<Eigen::Index>(w)) += as_mat(g, t, w);
    });
  }
  return out;
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t t = parts[0].rank() == 2 ? parts[0].dim(0) : 0;
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const Tensor& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != t) {
      throw DimensionError("concat_cols: row counts differ: " + shape_string(parts[0].shape()) +
                           " vs " + shape_string(p.shape()));
    }
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  Tensor out(Shape{t, total});
  auto om = as_mat(out.data(), t, total);
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    om.middleCols(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(p.dim(1))) =
        as_mat(p.data(), t, p.dim(1));
    off += p.dim(1);
  }
  Tape* tape = Tape::active();
  if (tape != nullptr &&
      std::any_of(parts.begin(), parts.end(), [tape](const Tensor& p) { return tape->tracks(p); })) {
    std::vector<const Tensor*> inputs;
    for (const Tensor& p : parts) inputs.push_back(&p);
    tape->record(out, inputs,
                 [widths = std::move(widths), t, total](std::span<const double> g,
                                                        BackwardContext& ctx) {
                   auto gm = as_mat(g, t, total);
                   std::size_t off = 0;
                   for (std::size_t i = 0; i < widths.size(); ++i) {
                     if (auto d = ctx.input_grad(i); !d.empty()) {
                       as_mat(d, t, widths[i]) += gm.middleCols(static_cast<Eigen::Index>(off),
                                                                static_cast<Eigen::Index>(widths[i]));
                     }
                     off += widths[i];
                   }
                 });
  }
  return out;
}

Tensor stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no inputs");
  const std::size_t n = rows[0].size();
  Tensor out(Shape{rows.size(), n});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != n) {
      throw DimensionError("stack_rows: element sizes differ: " + shape_string(rows[0].shape()) +
                           " vs " + shape_string(rows[i].shape()));
    }
    std::copy(rows[i].data().begin(), rows[i].data().end(), out.data().begin() + i * n);
  }
  Tape* tape = Tape::active();
  if (tape != nullptr &&
      std::any_of(rows.begin(), rows.end(), [tape](const Tensor& r) { return tape->tracks(r); })) {
    std::vector<const Tensor*> inputs;
    for (const Tensor& r : rows) inputs.push_back(&r);
    const std::size_t k = rows.size();
    tape->record(out, inputs, [k, n](std::span<const double> g, BackwardContext& ctx) {
      for (std::size_t i = 0; i < k; ++i) {
        if (auto d = ctx.input_grad(i); !d.empty()) accumulate(d, g.subspan(i * n, n));
      }
    });
  }
  return out;
}

namespace {

void check_finite(const Tensor& x, const char* op) {
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

Tensor softmax_impl(const Tensor& x, const std::vector<bool>* column_mask) {
  check_finite(x, "softmax_rows");
  const std::size_t n = last_dim(x);
  const std::size_t rows = x.size() / n;
  if (column_mask && column_mask->size() != n) {
    throw DimensionError("softmax_rows: mask length " + std::to_string(column_mask->size()) +
                         " vs last dimension " + std::to_string(n));
  }
  Tensor out(x.shape());
  auto in = x.data();
  auto y = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = in.data() + r * n;
    double* yr = y.data() + r * n;
    double mx = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) {
      if (!column_mask || (*column_mask)[j]) mx = std::max(mx, xr[j]);
    }
    if (mx == -INFINITY) throw ContractError("softmax_rows: every column is masked");
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (column_mask && !(*column_mask)[j]) {
        yr[j] = 0.0;
      } else {
        yr[j] = std::exp(xr[j] - mx);
        total += yr[j];
      }
    }
    const double inv = 1.0 / total;
    for (std::size_t j = 0; j < n; ++j) yr[j] *= inv;
  }
  if (Tape* tape = recording_tape({&x})) {
    tape->record(out, {&x},
                 [sy = copy_of(out), rows, n](std::span<const double> g, BackwardContext& ctx) {
                   auto dx = ctx.input_grad(0);
                   for (std::size_t r = 0; r < rows; ++r) {
                     const double* yr = sy.data() + r * n;
                     const double* gr = g.data() + r * n;
                     double dot = 0.0;
                     for (std::size_t j = 0; j < n; ++j) dot += gr[j] * yr[j];
                     double* dr = dx.data() + r * n;
                     for (std::size_t j = 0; j < n; ++j) dr[j] += yr[j] * (gr[j] - dot);
                   }
                 });
  }
  return out;
}

}  // namespace

Tensor softmax_rows(const Tensor& x) { return softmax_impl(x, nullptr); }

Tensor softmax_rows(const Tensor& x, const std::vector<bool>& column_mask) {
  return softmax_impl(x, &column_mask);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t h = last_dim(x);
  if (gamma.size() != h || beta.size() != h) {
    throw DimensionError("layer_norm: gamma " + shape_string(gamma.shape()) + " / beta " +
                         shape_string(beta.shape()) + " vs input " + shape_string(x.shape()));
  }
  const std::size_t rows = x.size() / h;
  Tensor out(x.shape());
  Buffer xhat(x.size());
  Buffer inv_std(rows);
  auto in = x.data();
  auto y = out.data();
  auto gm = gamma.data();
  auto bt = beta.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = in.data() + r * h;
    double mean = 0.0;
    for (std::size_t j = 0; j < h; ++j) mean += xr[j];
    mean /= static_cast<double>(h);
    double var = 0.0;
    for (std::size_t j = 0; j < h; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<double>(h);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (std::size_t j = 0; j < h; ++j) {
      const double xh = (xr[j] - mean) * inv;
      xhat[r * h + j] = xh;
      y[r * h + j] = gm[j] * xh + bt[j];
    }
  }
  if (Tape* tape = recording_tape({&x, &gamma, &beta})) {
    tape->record(out, {&x, &gamma, &beta},
                 [xhat = std::move(xhat), inv_std = std::move(inv_std), sg = copy_of(gamma), rows,
                  h](std::span<const double> g, BackwardContext& ctx) {
                   auto dx = ctx.input_grad(0);
                   auto dgamma = ctx.input_grad(1);
                   auto dbeta = ctx.input_grad(2);
                   Buffer dxhat(h);
                   for (std::size_t r = 0; r < rows; ++r) {
                     const double* gr = g.data() + r * h;
                     const double* xr = xhat.data() + r * h;
                     if (!dgamma.empty()) {
                       for (std::size_t j = 0; j < h; ++j) dgamma[j] += gr[j] * xr[j];
                     }
                     if (!dbeta.empty()) {
                       for (std::size_t j = 0; j < h; ++j) dbeta[j] += gr[j];
                     }
                     if (dx.empty()) continue;
                     double mean_d = 0.0, mean_dx = 0.0;
                     for (std::size_t j = 0; j < h; ++j) {
                       dxhat[j] = gr[j] * sg[j];
                       mean_d += dxhat[j];
                       mean_dx += dxhat[j] * xr[j];
                     }
                     mean_d /= static_cast<double>(h);
                     mean_dx /= static_cast<double>(h);
                     double* dr = dx.data() + r * h;
                     for (std::size_t j = 0; j < h; ++j) {
                       dr[j] += inv_std[r] * (dxhat[j] - mean_d - xr[j] * mean_dx);
                     }
                   }
                 });
  }
  return out;
}

namespace {
constexpr double kGeluScale = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluCubic = 0.044715;
}  // namespace

Tensor gelu(const Tensor& x) {
  Tensor out(x.shape());
  auto in = x.data();
  auto y = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double v = in[i];
    y[i] = 0.5 * v * (1.0 + std::tanh(kGeluScale * (v + kGeluCubic * v * v * v)));
  }
  if (Tape* tape = recording_tape({&x})) {
    tape->record(out, {&x}, [sx = copy_of(x)](std::span<const double> g, BackwardContext& ctx) {
      auto dx = ctx.input_grad(0);
      for (std::size_t i = 0; i < sx.size(); ++i) {
        const double v = sx[i];
        const double th = std::tanh(kGeluScale * (v + kGeluCubic * v * v * v));
        const double du = kGeluScale * (1.0 + 3.0 * kGeluCubic * v * v);
        dx[i] += g[i] * (0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du);
      }
    });
  }
  return out;
}

Tensor embedding_lookup(const Tensor& table, std::span<const int> ids) {
  require_rank(table, 2, "embedding_lookup");
  const std::size_t v = table.dim(0), d = table.dim(1);
  if (ids.empty()) throw DimensionError("embedding_lookup: empty id list");
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= v) {
      throw IndexError("embedding_lookup: id " + std::to_string(id) +
                       " out of range for table with V=" + std::to_string(v));
    }
  }
  Tensor out(Shape{ids.size(), d});
  auto src = table.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(src.begin() + static_cast<std::size_t>(ids[i]) * d, d, dst.begin() + i * d);
  }
  if (Tape* tape = recording_tape({&table})) {
    tape->record(out, {&table},
                 [sids = std::vector<int>(ids.begin(), ids.end()), d](std::span<const double> g,
                                                                      BackwardContext& ctx) {
                   auto dt = ctx.input_grad(0);
                   for (std::size_t i = 0; i < sids.size(); ++i) {
                     double* row = dt.data() + static_cast<std::size_t>(sids[i]) * d;
                     const double* gr = g.data() + i * d;
                     for (std::size_t j = 0; j < d; ++j) row[j] += gr[j];
                   }
                 });
  }
  return out;
}

Tensor cross_entropy_masked(const Tensor& logits, std::span<const int> targets,
                            const std::vector<bool>& mask) {
  require_rank(logits, 2, "cross_entropy_masked");
  const std::size_t t = logits.dim(0), c = logits.dim(1);
  if (targets.size() != t || mask.size() != t) {
    throw DimensionError("cross_entropy_masked: " + std::to_string(targets.size()) +
                         " targets and " + std::to_string(mask.size()) + " mask entries for " +
                         shape_string(logits.shape()) + " logits");
  }
  std::size_t count = 0;
  for (std::size_t i = 0; i < t; ++i) {
    if (!mask[i]) continue;
    ++count;
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= c) {
      throw IndexError("cross_entropy_masked: target " + std::to_string(targets[i]) +
                       " out of range for " + std::to_string(c) + " classes");
    }
  }
  if (count == 0) throw ContractError("cross_entropy_masked: empty batch, every position is masked");
  check_finite(logits, "cross_entropy_masked");

  Buffer probs(t * c, 0.0);
  double loss = 0.0;
  auto lg = logits.data();
  for (std::size_t i = 0; i < t; ++i) {
    if (!mask[i]) continue;
    const double* row = lg.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += std::exp(row[j] - mx);
    const double log_z = mx + std::log(total);
    loss += log_z - row[targets[i]];
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(row[j] - log_z);
  }
  const double inv_n = 1.0 / static_cast<double>(count);
  Tensor out = Tensor::scalar(loss * inv_n);
  if (Tape* tape = recording_tape({&logits})) {
    tape->record(out, {&logits},
                 [probs = std::move(probs), tg = std::vector<int>(targets.begin(), targets.end()),
                  mask, t, c, inv_n](std::span<const double> g, BackwardContext& ctx) {
                   auto dl = ctx.input_grad(0);
                   const double s = g[0] * inv_n;
                   for (std::size_t i = 0; i < t; ++i) {
                     if (!mask[i]) continue;
                     for (std::size_t j = 0; j < c; ++j) dl[i * c + j] += s * probs[i * c + j];
                     dl[i * c + static_cast<std::size_t>(tg[i])] -= s;
                   }
                 });
  }
  return out;
}

Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  Buffer m(x.size());
  for (double& v : m) v = uniform01(rng) < rate ? 0.0 : keep_scale;
  Tensor out(x.shape());
  as_vec(out.data()) = as_vec(x.data()).cwiseProduct(as_vec(std::span<const double>(m)));
  if (Tape* tape = recording_tape({&x})) {
    tape->record(out, {&x}, [m = std::move(m)](std::span<const double> g, BackwardContext& ctx) {
      as_vec(ctx.input_grad(0)) += as_vec(g).cwiseProduct(as_vec(m));
    });
  }
  return out;
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t stride,
              std::size_t padding) {
  require_rank(input, 3, "conv2d");
  require_rank(kernels, 4, "conv2d");
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t cout = kernels.dim(0), k = kernels.dim(2);
  if (kernels.dim(1) != cin) {
    throw DimensionError("conv2d: kernels " + shape_string(kernels.shape()) + " expect " +
                         std::to_string(kernels.dim(1)) + " input channels, input " +
                         shape_string(input.shape()) + " has " + std::to_string(cin));
  }
  if (kernels.dim(3) != k || k % 2 == 0) {
    throw DimensionError("conv2d: kernels must be square with odd size, got " +
                         shape_string(kernels.shape()));
  }
  if (stride == 0) throw ConfigError("conv2d: stride must be >= 1");
  if (h + 2 * padding < k || w + 2 * padding < k) {
    throw DimensionError("conv2d: kernel " + std::to_string(k) + " larger than padded input " +
                         shape_string(input.shape()));
  }
  const std::size_t ho = (h + 2 * padding - k) / stride + 1;
  const std::size_t wo = (w + 2 * padding - k) / stride + 1;
  const std::size_t patch = cin * k * k;
  const std::size_t npix = ho * wo;

  // im2col: cols[patch x npix]
  Buffer cols(patch * npix, 0.0);
  auto in = input.data();
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* dst = cols.data() + ((c * k + ky) * k + kx) * npix;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                    static_cast<std::ptrdiff_t>(padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                      static_cast<std::ptrdiff_t>(padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            dst[oy * wo + ox] = in[(c * h + static_cast<std::size_t>(iy)) * w +
                                   static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
  Tensor out(Shape{cout, ho, wo});
  as_mat(out.data(), cout, npix).noalias() =
      as_mat(kernels.data(), cout, patch) * as_mat(std::span<const double>(cols), patch, npix);

  if (Tape* tape = recording_tape({&input, &kernels})) {
    Buffer sk = tape->tracks(input) ? copy_of(kernels) : Buffer{};
    if (!tape->tracks(kernels)) cols.clear();
    tape->record(
        out, {&input, &kernels},
        [cols = std::move(cols), sk = std::move(sk), cin, h, w, cout, k, ho, wo, stride, padding,
         patch, npix](std::span<const double> g, BackwardContext& ctx) {
          auto gm = as_mat(g, cout, npix);
          if (auto dk = ctx.input_grad(1); !dk.empty()) {
            as_mat(dk, cout, patch).noalias() +=
                gm * as_mat(std::span<const double>(cols), patch, npix).transpose();
          }
          auto din = ctx.input_grad(0);
          if (din.empty()) return;
          RowMat dcols = as_mat(std::span<const double>(sk), cout, patch).transpose() * gm;
          for (std::size_t c = 0; c < cin; ++c) {
            for (std::size_t ky = 0; ky < k; ++ky) {
              for (std::size_t kx = 0; kx < k; ++kx) {
                const double* src = dcols.data() + ((c * k + ky) * k + kx) * npix;
                for (std::size_t oy = 0; oy < ho; ++oy) {
                  const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                            static_cast<std::ptrdiff_t>(padding);
                  if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                  for (std::size_t ox = 0; ox < wo; ++ox) {
                    const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                              static_cast<std::ptrdiff_t>(padding);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                    din[(c * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)] +=
                        src[oy * wo + ox];
                  }
                }
              }
            }
          }
        });
  }
  return out;
}

}  // namespace ielab
