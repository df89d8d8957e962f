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

// Sampled ranking evaluation: each test user's held-out positive competes
// with its 99 fixed negatives. Scores tied with the positive rank ahead of it
// when the competing item id is smaller, so results are a pure function of
// the embeddings.

#pragma once

#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hgcl/dataset.hpp"
#include "hgcl/objectives.hpp"
#include "hgcl/tensor.hpp"

namespace hgcl {

struct RankContribution {
  double hr = 0.0;
  double ndcg = 0.0;
};

/// 1-based rank -> HR@K / NDCG@K contribution of one user.
inline RankContribution contribution(std::size_t rank, std::size_t k) {
  if (rank == 0) throw std::invalid_argument("ranks are 1-based");
  if (rank > k) return {};
  return {1.0, 1.0 / std::log2(static_cast<double>(rank) + 1.0)};
}

/// 1-based position of the positive among the candidates, descending score,
/// ties broken towards the smaller item id.
template <typename T>
std::size_t rank_of_positive(NodeId pos_item, T pos_score, std::span<const NodeId> neg_items, std::span<const T> neg_scores) {
  std::size_t ahead = 0;
  for (std::size_t j = 0; j < neg_items.size(); ++j) {
    if (neg_scores[j] > pos_score || (neg_scores[j] == pos_score && neg_items[j] < pos_item)) ++ahead;
  }
  return ahead + 1;
}

struct GroupMetrics {
  std::size_t users = 0;
  double hr = 0.0;
  double ndcg = 0.0;
  double mean_interactions = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;  // mean total loss per step
  double bpr = 0.0;
  double cl = 0.0;    // mean weighted contrastive part; 0 when disabled
  double seconds = 0.0;
  std::optional<double> hr;
  std::optional<double> ndcg;
};

struct MetricsReport {
  std::size_t k = 10;
  std::size_t users = 0;
  double hr = 0.0;
  double ndcg = 0.0;
  std::vector<GroupMetrics> groups;  // activity buckets, sparsest first
  std::vector<EpochRecord> epochs;
};

struct UserRank {
  NodeId user;
  std::size_t rank;
};

template <typename T>
std::vector<UserRank> rank_test_users(const Tensor<T>& users, const Tensor<T>& items, const InteractionDataset& ds) {
  if (users.rows() != ds.m || items.rows() != ds.n) {
    throw ShapeError("embedding tables " + users.shape().str() + "/" + items.shape().str() +
                     " do not match dataset dimensions m=" + std::to_string(ds.m) + " n=" + std::to_string(ds.n));
  }
  std::vector<UserRank> out;
  std::vector<Edge> pairs;
  for (std::size_t u = 0; u < ds.m; ++u) {
    if (!ds.has_test(u)) continue;
    const auto& negs = ds.eval_negatives[u];
    if (negs.empty()) throw std::runtime_error("user " + std::to_string(u) + " has a test item but no eval negatives");
    const NodeId uid = static_cast<NodeId>(u);
    pairs.clear();
    pairs.emplace_back(uid, ds.test_positive[u]);
    for (NodeId i : negs) pairs.emplace_back(uid, i);
    const std::vector<T> scores = predict_scores(users, items, pairs);
    const std::span<const T> neg_scores(scores.data() + 1, negs.size());
    out.push_back({uid, rank_of_positive<T>(ds.test_positive[u], scores[0], negs, neg_scores)});
  }
  return out;
}

/// Equal-count activity buckets over the evaluated users.
inline std::vector<GroupMetrics> sparsity_report(std::span<const UserRank> ranks, const InteractionDataset& ds, std::size_t k) {
  std::vector<NodeId> users;
  for (const auto& r : ranks) users.push_back(r.user);
  std::vector<std::size_t> counts(ds.m);
  for (std::size_t u = 0; u < ds.m; ++u) counts[u] = ds.train_items[u].size();
  std::size_t groups = 0;
  const auto bucket = quantile_groups(users, counts, kSparsityGroups, &groups);
  std::vector<GroupMetrics> out(groups);
  for (std::size_t j = 0; j < ranks.size(); ++j) {
    GroupMetrics& g = out[static_cast<std::size_t>(bucket[j])];
    const auto c = contribution(ranks[j].rank, k);
    g.users++;
    g.hr += c.hr;
    g.ndcg += c.ndcg;
    g.mean_interactions += static_cast<double>(counts[static_cast<std::size_t>(ranks[j].user)]);
  }
  for (auto& g : out) {
    if (g.users == 0) continue;
    const double n = static_cast<double>(g.users);
    g.hr /= n;
    g.ndcg /= n;
    g.mean_interactions /= n;
  }
  return out;
}

template <typename T>
MetricsReport evaluate(const Tensor<T>& users, const Tensor<T>& items, const InteractionDataset& ds, std::size_t k = 10) {
  MetricsReport rep;
  rep.k = k;
  const auto ranks = rank_test_users(users, items, ds);
  for (const auto& r : ranks) {
    const auto c = contribution(r.rank, k);
    rep.hr += c.hr;
    rep.ndcg += c.ndcg;
  }
  rep.users = ranks.size();
  if (rep.users) {
    rep.hr /= static_cast<double>(rep.users);
    rep.ndcg /= static_cast<double>(rep.users);
  }
  rep.groups = sparsity_report(ranks, ds, k);
  return rep;
}

/// "metric,group,value" rows: overall under group "all", buckets as g1..g5.
inline void write_metrics_csv(std::ostream& os, const MetricsReport& rep) {
  os << "metric,group,value\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  const std::string hr = "hr@" + std::to_string(rep.k), ndcg = "ndcg@" + std::to_string(rep.k);
  os << hr << ",all," << rep.hr << '\n' << ndcg << ",all," << rep.ndcg << '\n' << "users,all," << rep.users << '\n';
  for (std::size_t g = 0; g < rep.groups.size(); ++g) {
    const std::string name = "g" + std::to_string(g + 1);
    const auto& m = rep.groups[g];
    os << hr << ',' << name << ',' << m.hr << '\n'
       << ndcg << ',' << name << ',' << m.ndcg << '\n'
       << "users," << name << ',' << m.users << '\n'
       << "mean_interactions," << name << ',' << m.mean_interactions << '\n';
  }
}

}  // namespace hgcl
