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

// Dense float64 tensors and the reverse-mode tape that differentiates them.
//
// A Tape becomes "active" on the current thread through a TapeScope. While a
// tape is active, every op in ops.hpp whose inputs include a tensor tracked by
// that tape records a node; the output then carries a NodeId on the tape.
// Parameters enter the tape through Tape::watch. Nothing is recorded when no
// tape is active, so inference pays no bookkeeping cost.

#ifndef IELAB_TENSOR_HPP_
#define IELAB_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <new>
#include <vector>

namespace ielab {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_product(const Shape& shape);

// 64-byte aligned allocation for numeric buffers. Vectorized reductions peel
// leading elements up to the first aligned address, so a fixed alignment keeps
// summation order, and therefore every result bit, independent of heap layout.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

struct NodeId {
  std::uint64_t tape = 0;
  std::uint32_t generation = 0;
  std::uint32_t index = 0;
};

class Tensor {
 public:
  // A scalar zero.
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);
  Tensor(Shape shape, Buffer data);

  static Tensor scalar(double value);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  // Row-major 2-D access; no bounds checks.
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  double item() const;

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool v) { requires_grad_ = v; }

  const std::optional<NodeId>& node() const { return node_; }
  void set_node(std::optional<NodeId> node) { node_ = node; }

  // Same values, no tape identity.
  Tensor detach() const;
  void fill(double v);

 private:
  Shape shape_;
  Buffer data_;
  bool requires_grad_ = false;
  std::optional<NodeId> node_;
};

class Tape;

// Handed to a node's backward function; exposes the gradient buffers of the
// node's inputs. Buffers of untracked inputs are empty spans.
class BackwardContext {
 public:
  BackwardContext(Tape& tape, const std::vector<std::optional<std::uint32_t>>& parents)
      : tape_(tape), parents_(parents) {}
  std::span<double> input_grad(std::size_t input);
  bool wants(std::size_t input) const {
    return input < parents_.size() && parents_[input].has_value();
  }

 private:
  Tape& tape_;
  const std::vector<std::optional<std::uint32_t>>& parents_;
};

using BackwardFn = std::function<void(std::span<const double> grad_out, BackwardContext& ctx)>;

// Gradients produced by one backward pass.
class Gradients {
 public:
  // Gradient of `t`, zeros when no gradient reached it. Throws ContractError
  // if `t` was not recorded on the tape that produced these gradients.
  Tensor of(const Tensor& t) const;
  // Borrowed view; empty span when no gradient reached `t`.
  std::span<const double> view(const Tensor& t) const;

 private:
  friend class Tape;
  std::uint64_t tape_ = 0;
  std::uint32_t generation_ = 0;
  std::vector<Shape> shapes_;
  std::vector<Buffer> grads_;

  std::uint32_t index_of(const Tensor& t) const;
};

class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers `leaf` as a differentiable input of the current recording.
  void watch(Tensor& leaf);
  bool tracks(const Tensor& t) const;
  bool tracks_any(std::initializer_list<const Tensor*> ts) const;

  // Records `output` as produced from `inputs`. A no-op when no input is
  // tracked.
  void record(Tensor& output, std::initializer_list<const Tensor*> inputs, BackwardFn fn);
  void record(Tensor& output, std::span<const Tensor* const> inputs, BackwardFn fn);

  // Reverse pass from a scalar loss. Allowed once per recording.
  Gradients backward(const Tensor& loss);

  // Drops all nodes and starts a new recording; old NodeIds become stale.
  void reset();

  std::size_t size() const { return nodes_.size(); }

  // The tape active on this thread, or nullptr.
  static Tape* active();

 private:
  friend class BackwardContext;
  friend class TapeScope;

  struct Node {
    Shape shape;
    std::vector<std::optional<std::uint32_t>> parents;
    BackwardFn backward;
  };

  std::uint64_t uid_;
  std::uint32_t generation_ = 0;
  bool consumed_ = false;
  std::vector<Node> nodes_;
  std::vector<Buffer> grads_;

  std::span<double> grad_buffer(std::uint32_t index);
};

// Makes a tape active on the current thread for the scope's lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Returns the active tape if it tracks any of `inputs`, else nullptr. Ops use
// this to decide whether to save activations.
Tape* recording_tape(std::initializer_list<const Tensor*> inputs);

}  // namespace ielab

#endif  // IELAB_TENSOR_HPP_
