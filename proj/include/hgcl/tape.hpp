/*
 * Copyright 2026 The hgcl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hgcl/tensor.hpp"

namespace hgcl {

class TapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Handle to a node recorded on a Tape.
struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
  bool valid() const { return id != kNone; }
};

/// Linear record of primitive applications. Nodes are appended in evaluation
/// order, so every input of node t has an index below t and the backward sweep
/// is the exact reverse of recording.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor<T> value) { return push_leaf(std::move(value), false); }
  Var parameter(Tensor<T> value) { return push_leaf(std::move(value), true); }

  /// Records a primitive application. `back` runs only when some input needs a gradient.
  Var record(std::string_view op, Tensor<T> value, std::vector<Var> inputs, BackwardFn back) {
    if (finalized_) throw TapeError("cannot record '" + std::string(op) + "' on a finalized tape");
    bool needs = false;
    for (Var in : inputs) {
      check(in);
      needs = needs || nodes_[in.id].requires_grad;
    }
    Node node;
    node.op = std::string(op);
    node.value = std::move(value);
    node.inputs = std::move(inputs);
    node.requires_grad = needs;
    if (needs) node.backward = std::move(back);
    nodes_.push_back(std::move(node));
    return Var{nodes_.size() - 1};
  }

  const Tensor<T>& value(Var v) const {
    check(v);
    return nodes_[v.id].value;
  }

  /// Gradient of the last backward() target with respect to `v`.
  const Tensor<T>& grad(Var v) const {
    check(v);
    const Node& n = nodes_[v.id];
    if (!n.requires_grad) throw TapeError("node '" + n.op + "' does not carry a gradient");
    if (!differentiated_) throw TapeError("gradient requested before backward()");
    return n.grad;
  }

  bool requires_grad(Var v) const {
    check(v);
    return nodes_[v.id].requires_grad;
  }

  const std::vector<Var>& inputs(std::size_t node) const { return nodes_[node].inputs; }
  const Tensor<T>& node_value(std::size_t node) const { return nodes_[node].value; }
  const Tensor<T>& node_grad(std::size_t node) const { return nodes_[node].grad; }

  /// Accumulation target for an input's gradient during backward.
  Tensor<T>& grad_accumulator(Var v) { return nodes_[v.id].grad; }

  std::size_t size() const { return nodes_.size(); }
  std::string_view op(std::size_t node) const { return nodes_[node].op; }

  void finalize() { finalized_ = true; }
  bool finalized() const { return finalized_; }

  /// Branch decisions taken by piecewise primitives during recording. Two
  /// evaluations with equal signatures lie on the same smooth piece.
  void note_branch(bool taken) { branches_.push_back(taken); }
  const std::vector<bool>& branch_signature() const { return branches_; }

  void backward(Var loss) {
    check(loss);
    if (!finalized_) throw TapeError("backward() called before the forward pass was finalized");
    if (differentiated_) throw TapeError("tape already differentiated; record a new tape");
    const Node& target = nodes_[loss.id];
    if (target.value.size() != 1) {
      throw TapeError("backward() target must be scalar, got shape " + target.value.shape().str());
    }
    for (Node& n : nodes_) {
      if (n.requires_grad) n.grad = Tensor<T>(n.value.shape(), T(0));
    }
    differentiated_ = true;
    if (!target.requires_grad) return;
    nodes_[loss.id].grad[0] = T(1);
    for (std::size_t t = loss.id + 1; t-- > 0;) {
      Node& n = nodes_[t];
      if (!n.requires_grad || !n.backward) continue;
      n.backward(*this, t);
      for (Var in : n.inputs) {
        const Node& src = nodes_[in.id];
        if (src.requires_grad && !src.grad.all_finite()) {
          throw TapeError("non-finite gradient produced by primitive '" + n.op + "'");
        }
      }
    }
  }

 private:
  struct Node {
    std::string op;
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<Var> inputs;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push_leaf(Tensor<T> value, bool trainable) {
    if (finalized_) throw TapeError("cannot add a leaf to a finalized tape");
    Node node;
    node.op = trainable ? "parameter" : "constant";
    node.value = std::move(value);
    node.requires_grad = trainable;
    nodes_.push_back(std::move(node));
    return Var{nodes_.size() - 1};
  }

  void check(Var v) const {
    if (!v.valid() || v.id >= nodes_.size()) throw TapeError("variable does not belong to this tape");
  }

  std::vector<Node> nodes_;
  std::vector<bool> branches_;
  bool finalized_ = false;
  bool differentiated_ = false;
};

}  // namespace hgcl
