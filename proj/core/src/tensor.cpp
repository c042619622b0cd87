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

#include "ielab/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <utility>

#include "ielab/error.hpp"

namespace ielab {

namespace {

std::atomic<std::uint64_t> next_tape_uid{1};
thread_local Tape* active_tape = nullptr;

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be >= 1, got " + shape_string(shape));
  }
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_product(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor() : shape_{1}, data_(1, 0.0) {}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_product(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : Tensor(std::move(shape), Buffer(data.begin(), data.end())) {}

Tensor::Tensor(Shape shape, Buffer data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (shape_product(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_string(shape_) + " needs " +
                         std::to_string(shape_product(shape_)) + " values, got " +
                         std::to_string(data_.size()));
  }
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{1}, std::vector<double>{value}); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  if (rows.size() == 0) throw DimensionError("matrix literal needs at least one row");
  const std::size_t cols = rows.begin()->size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor(Shape{rows.size(), cols}, std::move(data));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

double Tensor::item() const {
  if (data_.size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

Tensor Tensor::detach() const {
  Tensor t(shape_, data_);
  return t;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

// --- BackwardContext --------------------------------------------------------

std::span<double> BackwardContext::input_grad(std::size_t input) {
  if (!wants(input)) return {};
  return tape_.grad_buffer(*parents_[input]);
}

// --- Gradients --------------------------------------------------------------

std::uint32_t Gradients::index_of(const Tensor& t) const {
  const auto& node = t.node();
  if (!node || node->tape != tape_ || node->generation != generation_ ||
      node->index >= shapes_.size()) {
    throw ContractError("tensor of shape " + shape_string(t.shape()) +
                        " was not recorded on this tape");
  }
  return node->index;
}

Tensor Gradients::of(const Tensor& t) const {
  const std::uint32_t i = index_of(t);
  if (grads_[i].empty()) return Tensor(shapes_[i], 0.0);
  return Tensor(shapes_[i], grads_[i]);
}

std::span<const double> Gradients::view(const Tensor& t) const {
  return grads_[index_of(t)];
}

// --- Tape -------------------------------------------------------------------

Tape::Tape() : uid_(next_tape_uid.fetch_add(1)) {}

void Tape::watch(Tensor& leaf) {
  if (consumed_) throw ContractError("tape already consumed by backward(); call reset()");
  leaf.set_requires_grad(true);
  leaf.set_node(NodeId{uid_, generation_, static_cast<std::uint32_t>(nodes_.size())});
  nodes_.push_back(Node{leaf.shape(), {}, nullptr});
}

bool Tape::tracks(const Tensor& t) const {
  const auto& n = t.node();
  return n && n->tape == uid_ && n->generation == generation_;
}

bool Tape::tracks_any(std::initializer_list<const Tensor*> ts) const {
  return std::any_of(ts.begin(), ts.end(), [this](const Tensor* t) { return tracks(*t); });
}

void Tape::record(Tensor& output, std::initializer_list<const Tensor*> inputs, BackwardFn fn) {
  record(output, std::span<const Tensor* const>(inputs.begin(), inputs.size()), std::move(fn));
}

void Tape::record(Tensor& output, std::span<const Tensor* const> inputs, BackwardFn fn) {
  if (consumed_) throw ContractError("tape already consumed by backward(); call reset()");
  std::vector<std::optional<std::uint32_t>> parents;
  parents.reserve(inputs.size());
  bool any = false;
  for (const Tensor* t : inputs) {
    if (tracks(*t)) {
      parents.emplace_back(t->node()->index);
      any = true;
    } else {
      parents.emplace_back(std::nullopt);
    }
  }
  if (!any) return;
  output.set_node(NodeId{uid_, generation_, static_cast<std::uint32_t>(nodes_.size())});
  output.set_requires_grad(true);
  nodes_.push_back(Node{output.shape(), std::move(parents), std::move(fn)});
}

std::span<double> Tape::grad_buffer(std::uint32_t index) {
  auto& g = grads_[index];
  if (g.empty()) g.assign(shape_product(nodes_[index].shape), 0.0);
  return g;
}

Gradients Tape::backward(const Tensor& loss) {
  if (consumed_) {
    throw ContractError("backward() already ran on this recording; re-record the forward pass");
  }
  if (loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  if (!tracks(loss)) throw ContractError("loss was not recorded on this tape");
  consumed_ = true;

  grads_.assign(nodes_.size(), {});
  const std::uint32_t root = loss.node()->index;
  grad_buffer(root)[0] = 1.0;
  for (std::int64_t i = root; i >= 0; --i) {
    Node& node = nodes_[static_cast<std::size_t>(i)];
    if (!node.backward || grads_[i].empty()) continue;
    BackwardContext ctx(*this, node.parents);
    node.backward(grads_[i], ctx);
    // Saved activations are no longer needed.
    node.backward = nullptr;
  }

  Gradients out;
  out.tape_ = uid_;
  out.generation_ = generation_;
  out.shapes_.reserve(nodes_.size());
  for (const Node& n : nodes_) out.shapes_.push_back(n.shape);
  out.grads_ = std::move(grads_);
  grads_.clear();
  return out;
}

void Tape::reset() {
  nodes_.clear();
  grads_.clear();
  consumed_ = false;
  ++generation_;
}

Tape* Tape::active() { return active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(active_tape) { active_tape = &tape; }
TapeScope::~TapeScope() { active_tape = previous_; }

Tape* recording_tape(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = active_tape;
  if (tape == nullptr || !tape->tracks_any(inputs)) return nullptr;
  return tape;
}

}  // namespace ielab
