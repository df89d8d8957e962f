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

// Heterogeneous graph encoder: relation-aware gating of the shared initial
// embeddings, parameter-free propagation over the interaction, social and
// item-relation views, mean-pool fusion into the interaction stream, and
// normalized layer aggregation with a skip connection.

#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "hgcl/graph.hpp"
#include "hgcl/ops.hpp"
#include "hgcl/tape.hpp"

namespace hgcl {

struct GateVars {
  Var weight;  // d x d
  Var bias;    // d
};

/// E0 * sigmoid(E0 W + b), elementwise.
template <typename T>
Var self_gate(Tape<T>& tape, Var e0, const GateVars& gate) {
  Var logits = ad::add_row_bias(tape, ad::matmul(tape, e0, gate.weight), gate.bias);
  return ad::mul(tape, e0, ad::sigmoid(tape, logits));
}

/// One hop over a pre-normalized adjacency.
template <typename T>
Var propagate_layer(Tape<T>& tape, const CsrMatrix& adj, Var src) {
  return ad::spmm(tape, adj, src);
}

/// Element-wise mean of two views.
template <typename T>
Var fuse_views(Tape<T>& tape, Var main, Var aux) {
  return ad::scale(tape, ad::add(tape, main, aux), T(0.5));
}

/// E0 + sum_l rownorm(E^l).
template <typename T>
Var aggregate_layers(Tape<T>& tape, Var e0, std::span<const Var> layers) {
  if (layers.empty()) throw std::invalid_argument("aggregate_layers needs at least one layer");
  Var acc = e0;
  for (Var layer : layers) acc = ad::add(tape, acc, ad::row_l2_normalize(tape, layer));
  return acc;
}

struct EncoderOptions {
  std::size_t layers = 2;
  bool use_social = true;     // user-user view
  bool use_relations = true;  // item-item view
};

/// Per-stream embeddings. Auxiliary fields stay invalid when that view is disabled.
struct ViewEmbeddings {
  Var e_u0, e_i0, e_uu0, e_ii0;
  std::vector<Var> u_layers, i_layers, uu_layers, ii_layers;
  Var e_u, e_i, e_uu, e_ii;
};

/// Runs the full encoder. Interaction-view layers are recorded after fusion,
/// i.e. the values that feed the next hop; auxiliary streams propagate only
/// within their own graphs.
template <typename T>
ViewEmbeddings encode(Tape<T>& tape, Var e_u0, Var e_i0, const GateVars& user_gate, const GateVars& item_gate,
                      const HeteroGraph& g, const EncoderOptions& opt) {
  if (opt.layers < 1) throw std::invalid_argument("encoder needs at least one layer");
  ViewEmbeddings v;
  v.e_u0 = e_u0;
  v.e_i0 = e_i0;
  if (opt.use_social) v.e_uu0 = self_gate(tape, e_u0, user_gate);
  if (opt.use_relations) v.e_ii0 = self_gate(tape, e_i0, item_gate);

  Var cur_u = e_u0, cur_i = e_i0, cur_uu = v.e_uu0, cur_ii = v.e_ii0;
  for (std::size_t l = 0; l < opt.layers; ++l) {
    Var next_u = propagate_layer(tape, g.a_ui, cur_i);
    Var next_i = propagate_layer(tape, g.a_iu, cur_u);
    if (opt.use_social) {
      cur_uu = propagate_layer(tape, g.a_uu, cur_uu);
      v.uu_layers.push_back(cur_uu);
      next_u = fuse_views(tape, next_u, cur_uu);
    }
    if (opt.use_relations) {
      cur_ii = propagate_layer(tape, g.a_ii, cur_ii);
      v.ii_layers.push_back(cur_ii);
      next_i = fuse_views(tape, next_i, cur_ii);
    }
    cur_u = next_u;
    cur_i = next_i;
    v.u_layers.push_back(cur_u);
    v.i_layers.push_back(cur_i);
  }
  v.e_u = aggregate_layers<T>(tape, e_u0, v.u_layers);
  v.e_i = aggregate_layers<T>(tape, e_i0, v.i_layers);
  if (opt.use_social) v.e_uu = aggregate_layers<T>(tape, v.e_uu0, v.uu_layers);
  if (opt.use_relations) v.e_ii = aggregate_layers<T>(tape, v.e_ii0, v.ii_layers);
  return v;
}

}  // namespace hgcl
