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
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hgcl/log.hpp"
#include "hgcl/ops.hpp"
#include "hgcl/sparse.hpp"
#include "hgcl/tape.hpp"
#include "hgcl/tensor.hpp"

namespace hgcl {

struct LossConfig {
  double tau = 0.2;     // InfoNCE temperature
  double alpha1 = 1.0;  // user-side contrastive weight
  double alpha2 = 1.0;  // item-side contrastive weight
  double beta = 0.3;    // contrastive weight in the total loss
  double lambda = 1e-4; // L2 weight

  void validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(tau) || tau <= 0) throw std::invalid_argument("tau must be finite and > 0");
    if (!finite(alpha1) || alpha1 < 0 || !finite(alpha2) || alpha2 < 0) throw std::invalid_argument("alpha1/alpha2 must be >= 0");
    if (!finite(beta) || beta < 0) throw std::invalid_argument("beta must be >= 0");
    if (!finite(lambda) || lambda < 0) throw std::invalid_argument("lambda must be >= 0");
  }
};

/// Dot-product scores for (user, item) pairs.
template <typename T>
std::vector<T> predict_scores(const Tensor<T>& users, const Tensor<T>& items, std::span<const Edge> pairs) {
  if (users.cols() != items.cols()) throw ShapeError("user and item embeddings differ in width");
  const std::size_t d = users.cols();
  std::vector<T> out;
  out.reserve(pairs.size());
  for (auto [u, i] : pairs) {
    if (u < 0 || i < 0 || static_cast<std::size_t>(u) >= users.rows() || static_cast<std::size_t>(i) >= items.rows()) {
      throw std::out_of_range("score pair (" + std::to_string(u) + "," + std::to_string(i) + ") out of range");
    }
    const T* a = users.data() + static_cast<std::size_t>(u) * d;
    const T* b = items.data() + static_cast<std::size_t>(i) * d;
    T acc = 0;
    for (std::size_t c = 0; c < d; ++c) acc += a[c] * b[c];
    out.push_back(acc);
  }
  return out;
}

/// Differentiable scores for parallel user/item index lists.
template <typename T>
Var pair_scores(Tape<T>& tape, Var users, Var items, std::vector<NodeId> user_idx, std::vector<NodeId> item_idx) {
  return ad::row_dot(tape, ad::gather_rows(tape, users, std::move(user_idx)), ad::gather_rows(tape, items, std::move(item_idx)));
}

/// Sum over anchors r of -log softmax_r, where row r of the softmax runs over
/// cosine(anchor_r, target_c) / tau for every candidate c and the positive is
/// c = r. `rows` restricts anchors and candidates to a subset (empty: all).
template <typename T>
Var infonce_loss(Tape<T>& tape, Var anchor, Var target, std::span<const NodeId> rows, double tau) {
  if (!(tau > 0)) throw std::invalid_argument("temperature must be > 0");
  Var a = anchor, b = target;
  if (!rows.empty()) {
    std::vector<NodeId> idx(rows.begin(), rows.end());
    a = ad::gather_rows(tape, anchor, idx);
    b = ad::gather_rows(tape, target, std::move(idx));
  }
  std::size_t zero_rows = 0;
  Var sim = ad::cosine_sim_matrix(tape, a, b, &zero_rows);
  if (zero_rows) log::debug("infonce: ", zero_rows, " zero-norm rows scored as similarity 0");
  const T inv_tau = static_cast<T>(1.0 / tau);
  Var logits = ad::scale(tape, sim, inv_tau);
  Var lse = ad::sum(tape, ad::logsumexp_rows(tape, logits));
  Var pos = ad::sum(tape, ad::diagonal(tape, logits));
  return ad::sub(tape, lse, pos);
}

/// sum -ln sigmoid(pos - neg) + lambda * sum ||theta||^2.
template <typename T>
Var bpr_loss(Tape<T>& tape, Var pos, Var neg, std::span<const Var> regularized, double lambda) {
  Var ranking = ad::scale(tape, ad::sum(tape, ad::log_sigmoid(tape, ad::sub(tape, pos, neg))), T(-1));
  if (regularized.empty() || lambda == 0.0) return ranking;
  Var reg = ad::sum_squares(tape, regularized.front());
  for (std::size_t p = 1; p < regularized.size(); ++p) reg = ad::add(tape, reg, ad::sum_squares(tape, regularized[p]));
  return ad::add(tape, ranking, ad::scale(tape, reg, static_cast<T>(lambda)));
}

/// bpr + beta * (alpha1 * cl_u + alpha2 * cl_i). Invalid contrastive vars are
/// absent terms; beta == 0 yields exactly the bpr node.
template <typename T>
Var total_loss(Tape<T>& tape, Var bpr, Var cl_u, Var cl_i, const LossConfig& cfg) {
  auto check = [&](Var v, const char* name) {
    if (v.valid() && !std::isfinite(static_cast<double>(tape.value(v).item()))) {
      throw std::runtime_error(std::string("non-finite loss component: ") + name);
    }
  };
  check(bpr, "bpr");
  check(cl_u, "cl_user");
  check(cl_i, "cl_item");
  if (cfg.beta == 0.0) return bpr;
  Var cl;
  if (cl_u.valid()) cl = ad::scale(tape, cl_u, static_cast<T>(cfg.alpha1));
  if (cl_i.valid()) {
    Var term = ad::scale(tape, cl_i, static_cast<T>(cfg.alpha2));
    cl = cl.valid() ? ad::add(tape, cl, term) : term;
  }
  if (!cl.valid()) return bpr;
  return ad::add(tape, bpr, ad::scale(tape, cl, static_cast<T>(cfg.beta)));
}

/// Adam moments for an ordered list of parameters.
template <typename T>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
};

/// One bias-corrected Adam update. Non-finite gradients abort the step before
/// anything is modified.
template <typename T>
void adam_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>* const> grads, AdamState<T>& state,
               double lr) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam: parameter/gradient count mismatch");
  if (!(lr > 0)) throw std::invalid_argument("adam: learning rate must be > 0");
  for (std::size_t p = 0; p < params.size(); ++p) {
    require_shape(grads[p]->shape(), params[p]->shape(), "adam gradient");
    if (!grads[p]->all_finite()) throw std::runtime_error("adam: non-finite gradient for parameter " + std::to_string(p));
  }
  if (state.m.empty()) {
    for (const Tensor<T>* p : params) {
      state.m.emplace_back(p->shape(), T(0));
      state.v.emplace_back(p->shape(), T(0));
    }
  } else if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam: state was built for a different parameter list");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor<T>& theta = *params[p];
    const Tensor<T>& g = *grads[p];
    Tensor<T>& m = state.m[p];
    Tensor<T>& v = state.v[p];
    require_shape(m.shape(), theta.shape(), "adam moment");
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = b1 * m[i] + (T(1) - b1) * g[i];
      v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
      const double mhat = static_cast<double>(m[i]) / c1;
      const double vhat = static_cast<double>(v[i]) / c2;
      theta[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
}

}  // namespace hgcl
