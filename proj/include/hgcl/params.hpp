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

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hgcl/tensor.hpp"

namespace hgcl {

// A parameter tree is generic over its slot type: Tensor<T> for stored
// values, Var for the leaves of one recorded forward pass, Tensor<T>* for
// optimizer views. for_each_param walks several trees in lockstep in the
// fixed declaration order used by checkpoints.

template <typename S>
struct LinearSlots {
  S weight;
  S bias;
};

template <typename S>
struct MlpSlots {
  LinearSlots<S> fc1;
  S slope;
  LinearSlots<S> fc2;
};

template <typename S>
struct SideSlots {
  S gate_weight;
  S gate_bias;
  MlpSlots<S> learner1;  // produces the d x k factor
  MlpSlots<S> learner2;  // produces the k x d factor
  S transform_slope;
};

template <typename S>
struct ParamTree {
  S user_embedding;
  S item_embedding;
  SideSlots<S> user;
  SideSlots<S> item;
};

enum class ParamRole { kEmbedding, kGate, kMeta, kMetaSlope };
enum class ParamSide { kUser, kItem };

struct ParamInfo {
  std::string name;
  ParamRole role;
  ParamSide side;
  bool regularized() const { return role != ParamRole::kMetaSlope; }
};

namespace detail {

template <typename F, typename... Mlps>
void visit_mlp(F& f, const std::string& prefix, ParamSide side, Mlps&... mlp) {
  f(ParamInfo{prefix + ".fc1.weight", ParamRole::kMeta, side}, mlp.fc1.weight...);
  f(ParamInfo{prefix + ".fc1.bias", ParamRole::kMeta, side}, mlp.fc1.bias...);
  f(ParamInfo{prefix + ".act.slope", ParamRole::kMetaSlope, side}, mlp.slope...);
  f(ParamInfo{prefix + ".fc2.weight", ParamRole::kMeta, side}, mlp.fc2.weight...);
  f(ParamInfo{prefix + ".fc2.bias", ParamRole::kMeta, side}, mlp.fc2.bias...);
}

template <typename F, typename... Sides>
void visit_side(F& f, const std::string& prefix, ParamSide side, Sides&... s) {
  f(ParamInfo{prefix + "_gate.weight", ParamRole::kGate, side}, s.gate_weight...);
  f(ParamInfo{prefix + "_gate.bias", ParamRole::kGate, side}, s.gate_bias...);
  visit_mlp(f, prefix + "_meta.learner1", side, s.learner1...);
  visit_mlp(f, prefix + "_meta.learner2", side, s.learner2...);
  f(ParamInfo{prefix + "_meta.transform.slope", ParamRole::kMetaSlope, side}, s.transform_slope...);
}

}  // namespace detail

template <typename F, typename... Trees>
void for_each_param(F&& f, Trees&... trees) {
  f(ParamInfo{"user_embedding", ParamRole::kEmbedding, ParamSide::kUser}, trees.user_embedding...);
  f(ParamInfo{"item_embedding", ParamRole::kEmbedding, ParamSide::kItem}, trees.item_embedding...);
  detail::visit_side(f, "user", ParamSide::kUser, trees.user...);
  detail::visit_side(f, "item", ParamSide::kItem, trees.item...);
}

struct ModelDims {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t dim = 32;
  std::size_t rank = 3;
  std::size_t hidden() const { return dim; }
};

inline constexpr double kInitialSlope = 0.25;

/// Xavier-uniform weights and embeddings, zero biases, PReLU slopes at 0.25.
template <typename T>
ParamTree<Tensor<T>> init_params(const ModelDims& dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto xavier = [&](std::size_t rows, std::size_t cols) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor<T> t(Shape{rows, cols});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(u(rng));
    return t;
  };
  const std::size_t d = dims.dim, k = dims.rank, h = dims.hidden();
  auto side = [&]() {
    SideSlots<Tensor<T>> s;
    s.gate_weight = xavier(d, d);
    s.gate_bias = Tensor<T>(Shape{d});
    auto mlp = [&](std::size_t out) {
      MlpSlots<Tensor<T>> m;
      m.fc1.weight = xavier(3 * d, h);
      m.fc1.bias = Tensor<T>(Shape{h});
      m.slope = Tensor<T>::scalar(static_cast<T>(kInitialSlope));
      m.fc2.weight = xavier(h, out);
      m.fc2.bias = Tensor<T>(Shape{out});
      return m;
    };
    s.learner1 = mlp(d * k);
    s.learner2 = mlp(k * d);
    s.transform_slope = Tensor<T>::scalar(static_cast<T>(kInitialSlope));
    return s;
  };
  ParamTree<Tensor<T>> p;
  p.user_embedding = xavier(dims.users, d);
  p.item_embedding = xavier(dims.items, d);
  p.user = side();
  p.item = side();
  return p;
}

template <typename T>
std::vector<Tensor<T>> flatten_params(ParamTree<Tensor<T>>& tree) {
  std::vector<Tensor<T>> out;
  for_each_param([&](const ParamInfo&, Tensor<T>& t) { out.push_back(t); }, tree);
  return out;
}

template <typename S>
ParamTree<S> unflatten_params(std::span<const S> flat) {
  ParamTree<S> tree;
  std::size_t pos = 0;
  for_each_param([&](const ParamInfo&, S& slot) { slot = flat[pos++]; }, tree);
  if (pos != flat.size()) throw ShapeError("parameter list length does not match the model layout");
  return tree;
}

inline std::size_t param_count() {
  std::size_t n = 0;
  ParamTree<int> probe{};
  for_each_param([&](const ParamInfo&, int&) { ++n; }, probe);
  return n;
}

}  // namespace hgcl
