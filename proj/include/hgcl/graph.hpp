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
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hgcl/edge_io.hpp"
#include "hgcl/log.hpp"
#include "hgcl/sparse.hpp"

namespace hgcl {

/// Degree counts of the rows and columns of an edge list.
struct Degrees {
  std::vector<std::int32_t> row;
  std::vector<std::int32_t> col;
};

inline Degrees edge_degrees(std::span<const Edge> edges, std::size_t rows, std::size_t cols) {
  Degrees deg{std::vector<std::int32_t>(rows, 0), std::vector<std::int32_t>(cols, 0)};
  for (auto [r, c] : edges) {
    if (r < 0 || c < 0 || static_cast<std::size_t>(r) >= rows || static_cast<std::size_t>(c) >= cols) {
      throw std::out_of_range("edge (" + std::to_string(r) + "," + std::to_string(c) + ") outside " +
                              std::to_string(rows) + "x" + std::to_string(cols));
    }
    deg.row[static_cast<std::size_t>(r)]++;
    deg.col[static_cast<std::size_t>(c)]++;
  }
  return deg;
}

/// Symmetric degree normalization: w(r, c) = 1 / (sqrt(deg r) * sqrt(deg c)),
/// with degrees taken from the edge list itself. Edges must be distinct.
inline CsrMatrix normalize_adjacency(std::span<const Edge> edges, std::size_t rows, std::size_t cols) {
  const Degrees deg = edge_degrees(edges, rows, cols);
  std::vector<std::pair<Edge, double>> entries;
  entries.reserve(edges.size());
  for (auto e : edges) {
    const double dr = deg.row[static_cast<std::size_t>(e.first)];
    const double dc = deg.col[static_cast<std::size_t>(e.second)];
    entries.push_back({e, 1.0 / (std::sqrt(dr) * std::sqrt(dc))});
  }
  return CsrMatrix::from_triplets(rows, cols, std::move(entries));
}

/// 0/1 incidence matrix of an edge list.
inline CsrMatrix incidence(std::span<const Edge> edges, std::size_t rows, std::size_t cols) {
  std::vector<std::pair<Edge, double>> entries;
  entries.reserve(edges.size());
  for (auto e : edges) entries.push_back({e, 1.0});
  return CsrMatrix::from_triplets(rows, cols, std::move(entries));
}

/// Sorted, deduplicated, self-loop-free symmetric closure.
inline std::vector<Edge> symmetrize(std::span<const Edge> edges) {
  std::vector<Edge> out;
  out.reserve(edges.size() * 2);
  for (auto [a, b] : edges) {
    if (a == b) continue;
    out.emplace_back(a, b);
    out.emplace_back(b, a);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline std::vector<Edge> dedup(std::vector<Edge> edges) {
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

struct ItemRelations {
  std::vector<Edge> edges;  // symmetric, sorted
  std::size_t uncategorized = 0;
};

inline constexpr std::size_t kDefaultRelationCap = 10;

/// Connects items that share a category. Categories larger than cap + 1 are
/// wired as a circulant graph over a seeded shuffle of their members: each
/// item is linked to its cap/2 successors and predecessors (plus the opposite
/// member when cap is odd and the category size even), giving every member
/// exactly `cap` neighbors while keeping the relation symmetric. When both
/// cap and the category size are odd, members get cap - 1 neighbors.
/// `category[i] < 0` marks an item without a label; such items are skipped.
inline ItemRelations build_item_relations(std::span<const ExternalId> category,
                                          std::size_t cap = kDefaultRelationCap, std::uint64_t seed = 0) {
  ItemRelations out;
  std::map<ExternalId, std::vector<NodeId>> members;
  for (std::size_t i = 0; i < category.size(); ++i) {
    if (category[i] < 0) {
      ++out.uncategorized;
      continue;
    }
    members[category[i]].push_back(static_cast<NodeId>(i));
  }
  if (out.uncategorized) log::warn(out.uncategorized, " items without a category were excluded from item relations");

  std::mt19937_64 rng(seed);
  std::vector<Edge> edges;
  for (auto& [cat, items] : members) {
    const std::size_t s = items.size();
    if (s < 2) continue;
    if (s <= cap + 1) {
      for (std::size_t a = 0; a < s; ++a) {
        for (std::size_t b = a + 1; b < s; ++b) edges.emplace_back(items[a], items[b]);
      }
      continue;
    }
    std::shuffle(items.begin(), items.end(), rng);
    const std::size_t half = cap / 2;
    for (std::size_t a = 0; a < s; ++a) {
      for (std::size_t off = 1; off <= half; ++off) edges.emplace_back(items[a], items[(a + off) % s]);
      if (cap % 2 == 1 && s % 2 == 0 && a < s / 2) edges.emplace_back(items[a], items[a + s / 2]);
    }
  }
  out.edges = symmetrize(edges);
  return out;
}

/// The three normalized views plus the raw incidence used for neighbor sums.
struct HeteroGraph {
  std::size_t m = 0;  // users
  std::size_t n = 0;  // items
  CsrMatrix a_ui, a_iu, a_uu, a_ii;
  CsrMatrix b_ui, b_iu;  // unnormalized user-item incidence and its transpose
  std::vector<std::int32_t> deg_u, deg_i, deg_uu, deg_ii;
  std::size_t ui_edges = 0, uu_edges = 0, ii_edges = 0;

  std::size_t total_edges() const { return ui_edges + uu_edges + ii_edges; }
};

/// `ui` are distinct (user, item) pairs; `uu` and `ii` are symmetrized here.
inline HeteroGraph build_hetero_graph(std::size_t m, std::size_t n, std::span<const Edge> ui,
                                      std::span<const Edge> uu, std::span<const Edge> ii) {
  HeteroGraph g;
  g.m = m;
  g.n = n;
  const std::vector<Edge> ui_d = dedup({ui.begin(), ui.end()});
  const std::vector<Edge> uu_s = symmetrize(uu);
  const std::vector<Edge> ii_s = symmetrize(ii);
  g.a_ui = normalize_adjacency(ui_d, m, n);
  g.a_iu = g.a_ui.transpose();
  g.a_uu = normalize_adjacency(uu_s, m, m);
  g.a_ii = normalize_adjacency(ii_s, n, n);
  g.b_ui = incidence(ui_d, m, n);
  g.b_iu = g.b_ui.transpose();
  Degrees dui = edge_degrees(ui_d, m, n);
  g.deg_u = std::move(dui.row);
  g.deg_i = std::move(dui.col);
  g.deg_uu = edge_degrees(uu_s, m, m).row;
  g.deg_ii = edge_degrees(ii_s, n, n).row;
  g.ui_edges = ui_d.size();
  g.uu_edges = uu_s.size();
  g.ii_edges = ii_s.size();
  return g;
}

/// Dense 0-based ids for the external ids seen in the input files, assigned in
/// ascending external-id order.
class IdMap {
 public:
  IdMap() = default;
  IdMap(std::vector<ExternalId> users, std::vector<ExternalId> items)
      : users_(sorted_unique(std::move(users))), items_(sorted_unique(std::move(items))) {}

  std::size_t user_count() const { return users_.size(); }
  std::size_t item_count() const { return items_.size(); }
  const std::vector<ExternalId>& users() const { return users_; }
  const std::vector<ExternalId>& items() const { return items_; }

  NodeId user(ExternalId ext) const { return find(users_, ext, "user"); }
  NodeId item(ExternalId ext) const { return find(items_, ext, "item"); }

 private:
  static std::vector<ExternalId> sorted_unique(std::vector<ExternalId> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  }
  static NodeId find(const std::vector<ExternalId>& ids, ExternalId ext, const char* what) {
    auto it = std::lower_bound(ids.begin(), ids.end(), ext);
    if (it == ids.end() || *it != ext) throw std::out_of_range(std::string("unknown ") + what + " id " + std::to_string(ext));
    return static_cast<NodeId>(it - ids.begin());
  }

  std::vector<ExternalId> users_;
  std::vector<ExternalId> items_;
};

/// Everything named by a dataset manifest, remapped to dense ids.
struct DataBundle {
  IdMap ids;
  std::size_t m = 0;
  std::size_t n = 0;
  std::vector<Edge> interactions;
  std::vector<Edge> social;
  std::vector<Edge> item_relations;
};

/// Manifest keys: interactions, social, item_category (or item_relations for a
/// prebuilt item-item edge file), users, items. Relative paths resolve against
/// the manifest's directory. When users/items are given they must equal the
/// number of distinct ids found.
inline DataBundle load_manifest(const std::filesystem::path& manifest, std::size_t relation_cap = kDefaultRelationCap,
                                std::uint64_t relation_seed = 0) {
  std::ifstream in(manifest);
  if (!in) throw std::runtime_error("cannot open manifest " + manifest.string());
  const auto kv = read_key_values(in, manifest.string());
  const auto base = manifest.parent_path();
  auto path_of = [&](const std::string& key) -> std::filesystem::path {
    auto it = kv.find(key);
    if (it == kv.end()) return {};
    std::filesystem::path p(it->second);
    return p.is_absolute() ? p : base / p;
  };
  const auto inter_path = path_of("interactions");
  if (inter_path.empty()) throw std::runtime_error(manifest.string() + ": missing 'interactions'");

  RawEdges inter = load_edge_file(inter_path, EdgeKind::kInteraction);
  RawEdges social;
  if (auto p = path_of("social"); !p.empty()) social = load_edge_file(p, EdgeKind::kSocial);
  std::map<ExternalId, ExternalId> categories;
  RawEdges relations;
  if (auto p = path_of("item_category"); !p.empty()) categories = load_item_categories(p);
  if (auto p = path_of("item_relations"); !p.empty()) relations = load_edge_file(p, EdgeKind::kItemRelation);

  std::vector<ExternalId> users, items;
  for (auto [u, i] : inter.pairs) {
    users.push_back(u);
    items.push_back(i);
  }
  for (auto [a, b] : social.pairs) {
    users.push_back(a);
    users.push_back(b);
  }
  for (const auto& entry : categories) items.push_back(entry.first);
  for (auto [a, b] : relations.pairs) {
    items.push_back(a);
    items.push_back(b);
  }

  DataBundle out;
  out.ids = IdMap(std::move(users), std::move(items));
  out.m = out.ids.user_count();
  out.n = out.ids.item_count();
  auto expect_count = [&](const char* key, std::size_t got) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    if (std::stoull(it->second) != got) {
      throw std::runtime_error(manifest.string() + ": " + key + "=" + it->second + " but found " +
                               std::to_string(got) + " distinct ids");
    }
  };
  expect_count("users", out.m);
  expect_count("items", out.n);

  for (auto [u, i] : inter.pairs) out.interactions.emplace_back(out.ids.user(u), out.ids.item(i));
  for (auto [a, b] : social.pairs) out.social.emplace_back(out.ids.user(a), out.ids.user(b));
  std::vector<Edge> item_edges;
  for (auto [a, b] : relations.pairs) item_edges.emplace_back(out.ids.item(a), out.ids.item(b));
  if (!categories.empty()) {
    std::vector<ExternalId> dense_cat(out.n, -1);
    for (auto [item, cat] : categories) dense_cat[static_cast<std::size_t>(out.ids.item(item))] = cat;
    auto rel = build_item_relations(dense_cat, relation_cap, relation_seed);
    item_edges.insert(item_edges.end(), rel.edges.begin(), rel.edges.end());
  }
  out.item_relations = symmetrize(item_edges);
  out.interactions = dedup(std::move(out.interactions));
  out.social = symmetrize(out.social);
  return out;
}

}  // namespace hgcl
