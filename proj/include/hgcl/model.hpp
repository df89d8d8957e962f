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

#include <algorithm>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hgcl/dataset.hpp"
#include "hgcl/encoder.hpp"
#include "hgcl/graph.hpp"
#include "hgcl/meta.hpp"
#include "hgcl/objectives.hpp"
#include "hgcl/params.hpp"
#include "hgcl/tape.hpp"

namespace hgcl {

struct Ablation {
  bool no_cl = false;
  bool no_meta = false;
  bool no_uu = false;
  bool no_ii = false;
};

enum class ClNegatives { kAuto, kFull, kBatch };

/// Candidate sets at or below this size use every node as an InfoNCE negative under kAuto.
inline constexpr std::size_t kFullNegativeLimit = 4096;

struct ModelConfig {
  std::size_t dim = 32;
  std::size_t layers = 2;
  std::size_t rank = 3;
  double alpha_u = 0.8;
  double alpha_i = 0.8;
  Ablation ablation;
  ClNegatives cl_negatives = ClNegatives::kAuto;

  bool use_social() const { return !ablation.no_uu; }
  bool use_relations() const { return !ablation.no_ii; }
  bool use_meta() const { return !ablation.no_meta; }
};

/// Whether a parameter takes part in the model under the given ablation.
inline bool param_active(const ParamInfo& info, const ModelConfig& cfg) {
  if (info.role == ParamRole::kEmbedding) return true;
  const bool side_on = info.side == ParamSide::kUser ? cfg.use_social() : cfg.use_relations();
  if (info.role == ParamRole::kGate) return side_on;
  return side_on && cfg.use_meta();
}

template <typename T>
ParamTree<Var> record_params(Tape<T>& tape, ParamTree<Tensor<T>>& params, const ModelConfig& cfg, bool trainable = true) {
  ParamTree<Var> vars;
  for_each_param(
      [&](const ParamInfo& info, Tensor<T>& value, Var& slot) {
        slot = trainable && param_active(info, cfg) ? tape.parameter(value) : tape.constant(value);
      },
      params, vars);
  return vars;
}

inline GateVars gate_of(const SideSlots<Var>& s) { return {s.gate_weight, s.gate_bias}; }

inline MetaMlpVars mlp_of(const MlpSlots<Var>& m) {
  return {{m.fc1.weight, m.fc1.bias}, m.slope, {m.fc2.weight, m.fc2.bias}};
}

/// Every intermediate of one forward pass.
struct ForwardCache {
  ViewEmbeddings views;
  Var meta_u, meta_i;
  TransformVars user_transform, item_transform;
  Var e_uu_m, e_ii_m;
  Var e_u_final, e_i_final;
};

template <typename T>
ForwardCache forward(Tape<T>& tape, const ParamTree<Var>& p, const HeteroGraph& g, const ModelConfig& cfg) {
  if (cfg.rank >= cfg.dim) throw std::invalid_argument("transform rank k must be smaller than d");
  ForwardCache c;
  c.views = encode(tape, p.user_embedding, p.item_embedding, gate_of(p.user), gate_of(p.item), g,
                   EncoderOptions{cfg.layers, cfg.use_social(), cfg.use_relations()});
  const ViewEmbeddings& v = c.views;

  if (cfg.use_social()) {
    if (cfg.use_meta()) {
      c.meta_u = extract_meta_knowledge(tape, v.e_u, v.e_uu, g.b_ui, v.e_i);
      c.user_transform = generate_transforms(tape, c.meta_u, mlp_of(p.user.learner1), mlp_of(p.user.learner2), cfg.dim, cfg.rank);
      c.e_uu_m = apply_transform(tape, c.user_transform, v.e_uu, p.user.transform_slope);
    }
    c.e_u_final = fuse_final(tape, v.e_u, v.e_uu, c.e_uu_m, cfg.alpha_u);
  } else {
    c.e_u_final = v.e_u;
  }
  if (cfg.use_relations()) {
    if (cfg.use_meta()) {
      c.meta_i = extract_meta_knowledge(tape, v.e_i, v.e_ii, g.b_iu, v.e_u);
      c.item_transform = generate_transforms(tape, c.meta_i, mlp_of(p.item.learner1), mlp_of(p.item.learner2), cfg.dim, cfg.rank);
      c.e_ii_m = apply_transform(tape, c.item_transform, v.e_ii, p.item.transform_slope);
    }
    c.e_i_final = fuse_final(tape, v.e_i, v.e_ii, c.e_ii_m, cfg.alpha_i);
  } else {
    c.e_i_final = v.e_i;
  }
  return c;
}

struct LossTerms {
  Var bpr, cl_u, cl_i, total;
};

inline std::vector<NodeId> unique_sorted(std::vector<NodeId> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

/// BPR over the batch plus the cross-view contrastive terms of every active side.
template <typename T>
LossTerms build_objective(Tape<T>& tape, const ForwardCache& c, const ParamTree<Var>& p, std::span<const BprTriple> batch,
                          const LossConfig& loss, const ModelConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("empty training batch");
  std::vector<NodeId> users, pos, neg;
  for (const auto& t : batch) {
    users.push_back(t.user);
    pos.push_back(t.positive);
    neg.push_back(t.negative);
  }
  std::vector<Var> regularized;
  for_each_param(
      [&](const ParamInfo& info, const Var& v) {
        if (info.regularized() && param_active(info, cfg)) regularized.push_back(v);
      },
      p);

  LossTerms out;
  Var s_pos = pair_scores(tape, c.e_u_final, c.e_i_final, users, pos);
  Var s_neg = pair_scores(tape, c.e_u_final, c.e_i_final, users, neg);
  out.bpr = bpr_loss(tape, s_pos, s_neg, std::span<const Var>(regularized), loss.lambda);

  const bool contrast = !cfg.ablation.no_cl && loss.beta > 0.0;
  auto rows_for = [&](std::size_t count, std::vector<NodeId> batch_rows) {
    const bool full = cfg.cl_negatives == ClNegatives::kFull ||
                      (cfg.cl_negatives == ClNegatives::kAuto && count <= kFullNegativeLimit);
    return full ? std::vector<NodeId>{} : unique_sorted(std::move(batch_rows));
  };
  if (contrast && cfg.use_social()) {
    Var anchor = c.e_uu_m.valid() ? ad::add(tape, c.e_uu_m, c.views.e_uu) : c.views.e_uu;
    const auto rows = rows_for(tape.value(c.views.e_u).rows(), users);
    out.cl_u = infonce_loss(tape, anchor, c.views.e_u, rows, loss.tau);
  }
  if (contrast && cfg.use_relations()) {
    Var anchor = c.e_ii_m.valid() ? ad::add(tape, c.e_ii_m, c.views.e_ii) : c.views.e_ii;
    std::vector<NodeId> items = pos;
    items.insert(items.end(), neg.begin(), neg.end());
    const auto rows = rows_for(tape.value(c.views.e_i).rows(), std::move(items));
    out.cl_i = infonce_loss(tape, anchor, c.views.e_i, rows, loss.tau);
  }
  LossConfig effective = loss;
  if (cfg.ablation.no_cl) effective.beta = 0.0;
  out.total = total_loss(tape, out.bpr, out.cl_u, out.cl_i, effective);
  return out;
}

/// Final fused embeddings without recording gradients.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> final_embeddings(ParamTree<Tensor<T>>& params, const HeteroGraph& g, const ModelConfig& cfg) {
  Tape<T> tape;
  ParamTree<Var> vars = record_params(tape, params, cfg, false);
  ForwardCache c = forward(tape, vars, g, cfg);
  return {tape.value(c.e_u_final), tape.value(c.e_i_final)};
}

}  // namespace hgcl
