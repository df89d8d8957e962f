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

// Text edge files: one edge per line, tab separated, '#' starts a comment line.

#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hgcl/log.hpp"

namespace hgcl {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& where, std::size_t line, const std::string& what)
      : std::runtime_error(where + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class EdgeKind { kInteraction, kSocial, kItemRelation };

using ExternalId = std::int64_t;
using RawPair = std::pair<ExternalId, ExternalId>;

/// Deduplicated pairs with the id ranges seen (max id + 1 per column).
struct RawEdges {
  std::vector<RawPair> pairs;
  std::size_t src_range = 0;
  std::size_t dst_range = 0;
};

namespace detail {

inline bool parse_id(std::string_view field, ExternalId& out) {
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && out >= 0;
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

/// Reads "a<TAB>b[<TAB>...]" lines from a stream; `where` labels errors.
template <typename Stream>
std::vector<RawPair> read_pairs(Stream& in, const std::string& where) {
  std::vector<RawPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto fields = split_tabs(line);
    if (fields.size() < 2) throw ParseError(where, lineno, "expected two tab-separated ids");
    RawPair p;
    if (!parse_id(fields[0], p.first) || !parse_id(fields[1], p.second)) {
      throw ParseError(where, lineno, "invalid integer id in '" + line + "'");
    }
    pairs.push_back(p);
  }
  return pairs;
}

}  // namespace detail

/// Parses edges from an in-memory stream. Social and item-relation pairs are
/// symmetrized and self loops dropped.
template <typename Stream>
RawEdges parse_edges(Stream& in, EdgeKind kind, const std::string& where = "<stream>") {
  RawEdges out;
  out.pairs = detail::read_pairs(in, where);
  if (out.pairs.empty()) throw std::runtime_error(where + ": no edges");
  if (kind != EdgeKind::kInteraction) {
    std::vector<RawPair> sym;
    sym.reserve(out.pairs.size() * 2);
    for (auto [a, b] : out.pairs) {
      if (a == b) continue;
      sym.emplace_back(a, b);
      sym.emplace_back(b, a);
    }
    out.pairs = std::move(sym);
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  out.pairs.erase(std::unique(out.pairs.begin(), out.pairs.end()), out.pairs.end());
  for (auto [a, b] : out.pairs) {
    out.src_range = std::max<std::size_t>(out.src_range, static_cast<std::size_t>(a) + 1);
    out.dst_range = std::max<std::size_t>(out.dst_range, static_cast<std::size_t>(b) + 1);
  }
  return out;
}

inline RawEdges load_edge_file(const std::filesystem::path& path, EdgeKind kind) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge file " + path.string());
  return parse_edges(in, kind, path.string());
}

/// item<TAB>category lines. An item listed more than once keeps its first label.
inline std::map<ExternalId, ExternalId> load_item_categories(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open item-category file " + path.string());
  auto pairs = detail::read_pairs(in, path.string());
  if (pairs.empty()) throw std::runtime_error(path.string() + ": no edges");
  std::map<ExternalId, ExternalId> out;
  std::size_t extra = 0;
  for (auto [item, cat] : pairs) {
    if (!out.emplace(item, cat).second) ++extra;
  }
  if (extra) log::warn(path.string(), ": ", extra, " additional category labels ignored");
  return out;
}

/// Flat key=value file; '#' comment lines and blank lines are skipped.
inline std::map<std::string, std::string> read_key_values(std::istream& in, const std::string& where) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const char* ws = " \t\r";
    s.erase(0, s.find_first_not_of(ws));
    auto last = s.find_last_not_of(ws);
    s.erase(last == std::string::npos ? 0 : last + 1);
    return s;
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(where, lineno, "expected key=value");
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

}  // namespace hgcl
