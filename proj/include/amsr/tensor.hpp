// Copyright 2026 The AMSR Authors
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

// Dense NCHW tensors and the append-only tape that records how they were
// produced. A tensor is an immutable value: its storage is shared and never
// written after construction, so copies are cheap and thread safe.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "amsr/errors.hpp"

namespace amsr {

struct Shape {
  std::int64_t n = 0;
  std::int64_t c = 0;
  std::int64_t h = 0;
  std::int64_t w = 0;

  constexpr std::int64_t numel() const { return n * c * h * w; }
  constexpr std::int64_t plane() const { return h * w; }
  bool operator==(const Shape&) const = default;

  std::string str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
           std::to_string(w);
  }
};

template <typename T>
class Tape;

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : data_(std::make_shared<const std::vector<T>>()) {}

  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(shape), data_(std::make_shared<const std::vector<T>>(checked_size(shape), fill)) {}

  Tensor(Shape shape, std::vector<T> values) : shape_(shape) {
    if (static_cast<std::int64_t>(values.size()) != checked_size(shape)) {
      throw ShapeError("tensor of shape " + shape.str() + " needs " +
                       std::to_string(shape.numel()) + " values, got " +
                       std::to_string(values.size()));
    }
    data_ = std::make_shared<const std::vector<T>>(std::move(values));
  }

  const Shape& shape() const { return shape_; }
  std::int64_t numel() const { return shape_.numel(); }
  std::span<const T> values() const { return {data_->data(), data_->size()}; }
  const T* data() const { return data_->data(); }
  T operator[](std::int64_t i) const { return (*data_)[static_cast<std::size_t>(i)]; }
  T at(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) const {
    return (*data_)[static_cast<std::size_t>(((n * shape_.c + c) * shape_.h + y) * shape_.w + x)];
  }
  std::vector<T> to_vector() const { return *data_; }

  Tape<T>* tape() const { return tape_; }
  int node() const { return node_; }
  bool tracked() const { return tape_ != nullptr; }

  /// Same values, no longer attached to any tape.
  Tensor detached() const {
    Tensor t = *this;
    t.tape_ = nullptr;
    t.node_ = -1;
    return t;
  }

  bool all_finite() const {
    return std::all_of(data_->begin(), data_->end(), [](T v) { return std::isfinite(v); });
  }

 private:
  friend class Tape<T>;

  static std::int64_t checked_size(const Shape& s) {
    if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) {
      throw ShapeError("negative dimension in shape " + s.str());
    }
    return s.numel();
  }

  Shape shape_;
  std::shared_ptr<const std::vector<T>> data_;
  Tape<T>* tape_ = nullptr;
  int node_ = -1;
};

/// Hands a backward function the gradient buffers of its parents. A parent
/// that is not on the tape (a constant) has no buffer.
template <typename T>
class ParentGrads {
 public:
  using Fetch = std::function<std::span<T>(std::size_t)>;

  ParentGrads(std::vector<int> parents, Fetch fetch)
      : parents_(std::move(parents)), fetch_(std::move(fetch)) {}

  bool wants(std::size_t slot) const { return parents_.at(slot) >= 0; }
  std::span<T> operator[](std::size_t slot) const {
    return wants(slot) ? fetch_(slot) : std::span<T>{};
  }

 private:
  std::vector<int> parents_;
  Fetch fetch_;
};

/// Gradient of a scalar with respect to every node of a tape.
template <typename T>
class Gradients {
 public:
  explicit Gradients(std::vector<std::vector<T>> per_node) : per_node_(std::move(per_node)) {}

  /// Gradient for `t`, which must live on the tape that produced this object.
  /// Nodes the loss does not depend on get zeros.
  std::vector<T> wrt(const Tensor<T>& t) const {
    if (!t.tracked()) throw ContractError("gradient requested for an untracked tensor");
    const auto& g = per_node_.at(static_cast<std::size_t>(t.node()));
    if (g.empty()) return std::vector<T>(static_cast<std::size_t>(t.numel()), T(0));
    return g;
  }

 private:
  std::vector<std::vector<T>> per_node_;
};

template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(std::span<const T> grad_out, const ParentGrads<T>& parents)>;

  struct Node {
    std::string op;
    Shape shape;
    std::vector<int> parents;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers `value` as a differentiable input.
  Tensor<T> leaf(const Tensor<T>& value) {
    if (value.tracked()) throw ContractError("tensor is already on a tape");
    return append("leaf", value, {}, nullptr);
  }

  /// Records an op result. `inputs` may mix tensors on this tape with constants.
  Tensor<T> record(const char* op, const Tensor<T>& result, std::span<const Tensor<T>* const> inputs,
                   BackwardFn backward) {
    std::vector<int> parents;
    parents.reserve(inputs.size());
    for (const Tensor<T>* in : inputs) parents.push_back(in->tracked() ? in->node() : -1);
    return append(op, result, std::move(parents), std::move(backward));
  }

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t k) const { return nodes_.at(k); }

  /// Dumps op kind, output shape and value range of every recorded node.
  void set_trace(std::ostream* os) { trace_ = os; }

  /// Reverse sweep in insertion order. Each node is visited exactly once.
  Gradients<T> backward(const Tensor<T>& loss) const {
    if (loss.tape() != this) throw ContractError("loss was not produced on this tape");
    if (loss.numel() != 1) {
      throw ContractError("backward needs a scalar loss, got shape " + loss.shape().str());
    }
    std::vector<std::vector<T>> grads(nodes_.size());
    grads[static_cast<std::size_t>(loss.node())].assign(1, T(1));
    for (std::size_t k = static_cast<std::size_t>(loss.node()) + 1; k-- > 0;) {
      const Node& nd = nodes_[k];
      if (grads[k].empty() || !nd.backward) continue;
      ParentGrads<T> access(nd.parents, [&](std::size_t slot) -> std::span<T> {
        auto& g = grads[static_cast<std::size_t>(nd.parents[slot])];
        if (g.empty()) g.assign(static_cast<std::size_t>(nodes_[nd.parents[slot]].shape.numel()), T(0));
        return {g.data(), g.size()};
      });
      nd.backward(std::span<const T>(grads[k].data(), grads[k].size()), access);
    }
    return Gradients<T>(std::move(grads));
  }

 private:
  Tensor<T> append(const char* op, const Tensor<T>& value, std::vector<int> parents, BackwardFn fn) {
    const int id = static_cast<int>(nodes_.size());
    for (int p : parents) {
      if (p >= id) throw ContractError("tape parent index out of order");
    }
    nodes_.push_back(Node{op, value.shape(), std::move(parents), std::move(fn)});
    Tensor<T> out = value;
    out.tape_ = this;
    out.node_ = id;
    if (trace_ != nullptr) {
      auto v = value.values();
      T lo = v.empty() ? T(0) : *std::min_element(v.begin(), v.end());
      T hi = v.empty() ? T(0) : *std::max_element(v.begin(), v.end());
      *trace_ << '#' << id << ' ' << op << ' ' << value.shape().str() << " [" << lo << ", " << hi
              << "]\n";
    }
    return out;
  }

  std::vector<Node> nodes_;
  std::ostream* trace_ = nullptr;
};

}  // namespace amsr
