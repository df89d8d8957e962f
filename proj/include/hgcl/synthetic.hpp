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
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "hgcl/edge_io.hpp"
#include "hgcl/graph.hpp"
#include "hgcl/sparse.hpp"

namespace hgcl {

struct SyntheticSpec {
  std::size_t users = 200;
  std::size_t items = 300;
  double homophily = 0.8;
  std::uint64_t seed = 1;
  std::size_t clusters = 0;            // 0 picks min(users, items) / 40 clamped to [2, 8]
  double affinity = 0.8;               // chance an interaction stays inside the user's cluster
  double category_noise = 0.1;         // chance an item's category is not its niche
  std::size_t subclusters = 3;         // niches per cluster; 1 disables the second level
  double sub_affinity = 0.7;           // chance an in-cluster pick stays inside the niche
  std::size_t min_interactions = 2;
  std::size_t max_interactions = 15;
  std::size_t min_friends = 2;
  std::size_t max_friends = 6;
};

/// Planted-cluster data set. Ids are dense and every user and item appears.
struct SyntheticData {
  std::size_t users = 0;
  std::size_t items = 0;
  std::vector<std::int32_t> user_cluster;
  std::vector<std::int32_t> item_cluster;
  std::vector<Edge> interactions;  // sorted, distinct
  std::vector<Edge> social;        // one direction per drawn friendship, sorted, distinct
  std::vector<ExternalId> item_category;
};

inline SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.users < 10 || spec.items < 10) throw std::invalid_argument("synthetic data needs at least 10 users and 10 items");
  if (!(spec.homophily >= 0.0 && spec.homophily <= 1.0)) throw std::invalid_argument("homophily must lie in [0, 1]");
  if (spec.min_interactions < 1 || spec.min_interactions > spec.max_interactions) {
    throw std::invalid_argument("invalid interaction count range");
  }
  const std::size_t C = spec.clusters ? spec.clusters : std::clamp<std::size_t>(std::min(spec.users, spec.items) / 40, 2, 8);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SyntheticData out;
  out.users = spec.users;
  out.items = spec.items;
  // Round-robin over a shuffled order keeps cluster sizes balanced.
  auto assign = [&](std::size_t count) {
    std::vector<std::int32_t> labels(count);
    for (std::size_t v = 0; v < count; ++v) labels[v] = static_cast<std::int32_t>(v % C);
    std::shuffle(labels.begin(), labels.end(), rng);
    return labels;
  };
  out.user_cluster = assign(spec.users);
  out.item_cluster = assign(spec.items);
  std::vector<std::vector<NodeId>> users_in(C), items_in(C);
  for (std::size_t u = 0; u < spec.users; ++u) users_in[static_cast<std::size_t>(out.user_cluster[u])].push_back(static_cast<NodeId>(u));
  for (std::size_t i = 0; i < spec.items; ++i) items_in[static_cast<std::size_t>(out.item_cluster[i])].push_back(static_cast<NodeId>(i));
  // Second level: niche s of cluster c is niche id c * S + s.
  const std::size_t S = std::max<std::size_t>(spec.subclusters, 1);
  std::vector<std::int32_t> user_niche(spec.users), item_niche(spec.items);
  std::vector<std::vector<NodeId>> users_niche(C * S), items_niche(C * S);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t j = 0; j < users_in[c].size(); ++j) {
      const NodeId u = users_in[c][j];
      user_niche[static_cast<std::size_t>(u)] = static_cast<std::int32_t>(c * S + j % S);
      users_niche[c * S + j % S].push_back(u);
    }
    for (std::size_t j = 0; j < items_in[c].size(); ++j) {
      const NodeId i = items_in[c][j];
      item_niche[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(c * S + j % S);
      items_niche[c * S + j % S].push_back(i);
    }
  }

  auto pick_from = [&](const std::vector<NodeId>& pool) {
    std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
    return pool[d(rng)];
  };
  auto pick_any = [&](std::size_t count) {
    std::uniform_int_distribution<NodeId> d(0, static_cast<NodeId>(count) - 1);
    return d(rng);
  };

  // Long-tailed activity so that the sparsity buckets are populated.
  const std::size_t max_deg = std::min(spec.max_interactions, spec.items > 110 ? spec.items - 101 : spec.items / 2);
  const std::size_t min_deg = std::min(spec.min_interactions, max_deg);
  for (std::size_t u = 0; u < spec.users; ++u) {
    const double r = unit(rng);
    const std::size_t deg = min_deg + static_cast<std::size_t>(std::floor(r * r * static_cast<double>(max_deg - min_deg + 1)));
    const auto& own = items_in[static_cast<std::size_t>(out.user_cluster[u])];
    const auto& niche = items_niche[static_cast<std::size_t>(user_niche[u])];
    std::vector<NodeId> chosen;
    std::size_t attempts = 0;
    while (chosen.size() < std::min(deg, max_deg) && attempts++ < 100 * deg) {
      NodeId i;
      if (unit(rng) < spec.affinity) {
        i = (unit(rng) < spec.sub_affinity && !niche.empty()) ? pick_from(niche) : pick_from(own);
      } else {
        i = pick_any(spec.items);
      }
      if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) chosen.push_back(i);
    }
    for (NodeId i : chosen) out.interactions.emplace_back(static_cast<NodeId>(u), i);
  }

  const std::size_t friends_hi = std::max(spec.min_friends, spec.max_friends);
  std::uniform_int_distribution<std::size_t> friend_count(spec.min_friends, friends_hi);
  for (std::size_t u = 0; u < spec.users; ++u) {
    const auto& own = users_in[static_cast<std::size_t>(out.user_cluster[u])];
    const auto& niche = users_niche[static_cast<std::size_t>(user_niche[u])];
    const std::size_t k = friend_count(rng);
    for (std::size_t f = 0; f < k; ++f) {
      NodeId v;
      do {
        if (unit(rng) < spec.homophily && own.size() > 1) {
          v = (unit(rng) < spec.sub_affinity && niche.size() > 1) ? pick_from(niche) : pick_from(own);
        } else {
          v = pick_any(spec.users);
        }
      } while (v == static_cast<NodeId>(u));
      out.social.emplace_back(static_cast<NodeId>(u), v);
    }
  }

  out.item_category.resize(spec.items);
  std::uniform_int_distribution<ExternalId> any_cat(0, static_cast<ExternalId>(C * S) - 1);
  for (std::size_t i = 0; i < spec.items; ++i) {
    out.item_category[i] = unit(rng) < spec.category_noise ? any_cat(rng) : item_niche[i];
  }

  // Items nobody picked still need an interaction so that every id is present.
  std::vector<bool> seen(spec.items, false);
  for (auto e : out.interactions) seen[static_cast<std::size_t>(e.second)] = true;
  for (std::size_t i = 0; i < spec.items; ++i) {
    if (!seen[i]) {
      const auto& pool = users_in[static_cast<std::size_t>(out.item_cluster[i])];
      out.interactions.emplace_back(pick_from(pool), static_cast<NodeId>(i));
    }
  }
  out.interactions = dedup(std::move(out.interactions));
  out.social = dedup(std::move(out.social));
  return out;
}

inline constexpr const char* kManifestName = "manifest.txt";

/// Writes interactions.tsv, social.tsv, item_category.tsv and manifest.txt.
inline std::filesystem::path write_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("interactions.tsv");
    f << "# user\titem\n";
    for (auto [u, i] : data.interactions) f << u << '\t' << i << '\n';
  }
  {
    auto f = open("social.tsv");
    f << "# user\tuser\n";
    for (auto [a, b] : data.social) f << a << '\t' << b << '\n';
  }
  {
    auto f = open("item_category.tsv");
    f << "# item\tcategory\n";
    for (std::size_t i = 0; i < data.item_category.size(); ++i) f << i << '\t' << data.item_category[i] << '\n';
  }
  {
    auto f = open(kManifestName);
    f << "interactions=interactions.tsv\n"
      << "social=social.tsv\n"
      << "item_category=item_category.tsv\n"
      << "users=" << data.users << '\n'
      << "items=" << data.items << '\n';
  }
  return dir / kManifestName;
}

}  // namespace hgcl
