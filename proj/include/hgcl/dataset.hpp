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
#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hgcl/log.hpp"
#include "hgcl/sparse.hpp"

namespace hgcl {

inline constexpr NodeId kNoItem = -1;
inline constexpr std::size_t kEvalNegatives = 99;
inline constexpr std::size_t kSparsityGroups = 5;

struct InteractionDataset {
  std::size_t m = 0;
  std::size_t n = 0;
  std::vector<Edge> train_edges;                   // sorted by (user, item)
  std::vector<std::vector<NodeId>> train_items;    // per user, sorted
  std::vector<NodeId> test_positive;               // kNoItem when the user has no test row
  std::vector<std::vector<NodeId>> eval_negatives;  // empty when the user has no test row
  std::vector<std::int32_t> user_group;            // activity bucket per user
  std::size_t group_count = 0;

  bool has_test(std::size_t u) const { return test_positive[u] != kNoItem; }

  std::vector<NodeId> test_users() const {
    std::vector<NodeId> out;
    for (std::size_t u = 0; u < m; ++u) {
      if (has_test(u)) out.push_back(static_cast<NodeId>(u));
    }
    return out;
  }

  bool interacted_in_train(NodeId u, NodeId i) const {
    const auto& items = train_items[static_cast<std::size_t>(u)];
    return std::binary_search(items.begin(), items.end(), i);
  }
};

/// Equal-count buckets of `users` ordered by (count, id). Sizes differ by at
/// most one, larger buckets first. The bucket count drops below `max_groups`
/// when fewer distinct counts exist; a single distinct count yields one bucket.
/// Returns the bucket index for each entry of `users`.
inline std::vector<std::int32_t> quantile_groups(std::span<const NodeId> users, std::span<const std::size_t> counts,
                                                 std::size_t max_groups, std::size_t* groups_out = nullptr) {
  std::vector<std::size_t> order(users.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ca = counts[static_cast<std::size_t>(users[a])];
    const auto cb = counts[static_cast<std::size_t>(users[b])];
    return ca != cb ? ca < cb : users[a] < users[b];
  });
  std::vector<std::size_t> distinct;
  for (NodeId u : users) distinct.push_back(counts[static_cast<std::size_t>(u)]);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::size_t groups = std::min(max_groups, distinct.size());
  if (groups < max_groups && !users.empty()) {
    log::warn("only ", distinct.size(), " distinct interaction counts; using ", groups, " activity groups");
  }
  if (groups == 0) groups = 1;

  std::vector<std::int32_t> out(users.size(), 0);
  const std::size_t base = users.size() / groups, extra = users.size() % groups;
  std::size_t pos = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t size = base + (g < extra ? 1 : 0);
    for (std::size_t k = 0; k < size; ++k) out[order[pos++]] = static_cast<std::int32_t>(g);
  }
  if (groups_out) *groups_out = groups;
  return out;
}

/// Leave-one-out split: every user with at least two interactions gets one
/// seeded-uniform held-out positive and `negatives` distinct items sampled
/// uniformly from the items the user never interacted with.
inline InteractionDataset split_leave_one_out(std::size_t m, std::size_t n, std::span<const Edge> interactions,
                                              std::uint64_t seed, std::size_t negatives = kEvalNegatives) {
  InteractionDataset ds;
  ds.m = m;
  ds.n = n;
  std::vector<std::vector<NodeId>> all(m);
  for (auto [u, i] : interactions) {
    if (u < 0 || i < 0 || static_cast<std::size_t>(u) >= m || static_cast<std::size_t>(i) >= n) {
      throw std::out_of_range("interaction (" + std::to_string(u) + "," + std::to_string(i) + ") out of range");
    }
    all[static_cast<std::size_t>(u)].push_back(i);
  }
  ds.train_items.resize(m);
  ds.test_positive.assign(m, kNoItem);
  ds.eval_negatives.resize(m);

  std::mt19937_64 rng(seed);
  std::size_t train_only = 0;
  std::vector<NodeId> pool;
  for (std::size_t u = 0; u < m; ++u) {
    auto& items = all[u];
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    if (items.size() < 2) {
      ds.train_items[u] = items;
      if (!items.empty()) ++train_only;
      continue;
    }
    std::uniform_int_distribution<std::size_t> pick(0, items.size() - 1);
    const std::size_t held = pick(rng);
    ds.test_positive[u] = items[held];
    for (std::size_t k = 0; k < items.size(); ++k) {
      if (k != held) ds.train_items[u].push_back(items[k]);
    }
    pool.clear();
    for (NodeId i = 0; static_cast<std::size_t>(i) < n; ++i) {
      if (!std::binary_search(items.begin(), items.end(), i)) pool.push_back(i);
    }
    if (pool.size() < negatives) {
      throw std::runtime_error("user " + std::to_string(u) + " has only " + std::to_string(pool.size()) +
                               " non-interacted items; " + std::to_string(negatives) + " negatives required");
    }
    // Partial Fisher-Yates: the first `negatives` slots form a uniform sample without replacement.
    for (std::size_t k = 0; k < negatives; ++k) {
      std::uniform_int_distribution<std::size_t> j(k, pool.size() - 1);
      std::swap(pool[k], pool[j(rng)]);
    }
    ds.eval_negatives[u].assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(negatives));
  }
  if (train_only) log::info(train_only, " users with fewer than 2 interactions kept as train-only");

  for (std::size_t u = 0; u < m; ++u) {
    for (NodeId i : ds.train_items[u]) ds.train_edges.emplace_back(static_cast<NodeId>(u), i);
  }
  std::vector<NodeId> everyone(m);
  std::iota(everyone.begin(), everyone.end(), 0);
  std::vector<std::size_t> counts(m);
  for (std::size_t u = 0; u < m; ++u) counts[u] = ds.train_items[u].size();
  ds.user_group = quantile_groups(everyone, counts, kSparsityGroups, &ds.group_count);
  return ds;
}

/// Text serialization used for reproducibility checks.
inline void write_dataset(std::ostream& os, const InteractionDataset& ds) {
  os << "m=" << ds.m << " n=" << ds.n << " groups=" << ds.group_count << '\n';
  for (auto [u, i] : ds.train_edges) os << "T " << u << ' ' << i << '\n';
  for (std::size_t u = 0; u < ds.m; ++u) {
    os << "U " << u << " g=" << ds.user_group[u] << " pos=" << ds.test_positive[u];
    for (NodeId i : ds.eval_negatives[u]) os << ' ' << i;
    os << '\n';
  }
}

struct BprTriple {
  NodeId user;
  NodeId positive;
  NodeId negative;
};

/// Uniform (user, positive) draws over train edges with rejection-sampled
/// negatives. Owns its random state; one sampler per consumer.
class BprSampler {
 public:
  BprSampler(const InteractionDataset& ds, std::uint64_t seed) : ds_(&ds), rng_(seed) {
    if (ds.train_edges.empty()) throw std::invalid_argument("BPR sampling needs a non-empty train set");
    for (std::size_t u = 0; u < ds.m; ++u) {
      if (!ds.train_items[u].empty() && ds.train_items[u].size() < ds.n) {
        any_unsaturated_ = true;
        break;
      }
    }
  }

  std::vector<BprTriple> next_batch(std::size_t batch_size) {
    if (!any_unsaturated_) throw std::runtime_error("every user interacted with every item; no negatives exist");
    std::uniform_int_distribution<std::size_t> edge_pick(0, ds_->train_edges.size() - 1);
    std::uniform_int_distribution<NodeId> item_pick(0, static_cast<NodeId>(ds_->n) - 1);
    std::vector<BprTriple> batch;
    batch.reserve(batch_size);
    while (batch.size() < batch_size) {
      const Edge e = ds_->train_edges[edge_pick(rng_)];
      if (ds_->train_items[static_cast<std::size_t>(e.first)].size() >= ds_->n) continue;
      NodeId neg;
      do {
        neg = item_pick(rng_);
      } while (ds_->interacted_in_train(e.first, neg));
      batch.push_back({e.first, e.second, neg});
    }
    return batch;
  }

 private:
  const InteractionDataset* ds_;
  std::mt19937_64 rng_;
  bool any_unsaturated_ = false;
};

}  // namespace hgcl
