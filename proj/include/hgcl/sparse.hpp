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
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hgcl {

using NodeId = std::int32_t;
using Edge = std::pair<NodeId, NodeId>;

/// Compressed sparse row matrix. Column indices within a row are sorted.
/// Weights are always stored in double precision.
class CsrMatrix {
 public:
  CsrMatrix() : row_ptr_(1, 0) {}
  CsrMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

  /// Builds from (row, col, weight) triplets. Duplicate coordinates are an error.
  static CsrMatrix from_triplets(std::size_t rows, std::size_t cols,
                                 std::vector<std::pair<Edge, double>> entries) {
    for (const auto& [e, w] : entries) {
      if (e.first < 0 || e.second < 0 || static_cast<std::size_t>(e.first) >= rows ||
          static_cast<std::size_t>(e.second) >= cols) {
        throw std::out_of_range("sparse entry (" + std::to_string(e.first) + "," +
                                std::to_string(e.second) + ") outside " + std::to_string(rows) +
                                "x" + std::to_string(cols));
      }
    }
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    CsrMatrix out(rows, cols);
    out.col_.reserve(entries.size());
    out.val_.reserve(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
      if (k > 0 && entries[k].first == entries[k - 1].first) {
        throw std::invalid_argument("duplicate sparse entry");
      }
      out.row_ptr_[entries[k].first.first + 1]++;
      out.col_.push_back(entries[k].first.second);
      out.val_.push_back(entries[k].second);
    }
    for (std::size_t r = 0; r < rows; ++r) out.row_ptr_[r + 1] += out.row_ptr_[r];
    return out;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return col_.size(); }

  std::size_t row_begin(std::size_t r) const { return row_ptr_[r]; }
  std::size_t row_end(std::size_t r) const { return row_ptr_[r + 1]; }
  NodeId col(std::size_t k) const { return col_[k]; }
  double value(std::size_t k) const { return val_[k]; }

  const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
  const std::vector<NodeId>& col_indices() const { return col_; }
  const std::vector<double>& values() const { return val_; }

  /// Weight at (r, c) or 0 when absent.
  double coeff(std::size_t r, std::size_t c) const {
    auto first = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
    auto last = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
    auto it = std::lower_bound(first, last, static_cast<NodeId>(c));
    if (it == last || *it != static_cast<NodeId>(c)) return 0.0;
    return val_[static_cast<std::size_t>(it - col_.begin())];
  }

  CsrMatrix transpose() const {
    std::vector<std::pair<Edge, double>> entries;
    entries.reserve(nnz());
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
        entries.push_back({{col_[k], static_cast<NodeId>(r)}, val_[k]});
      }
    }
    return from_triplets(cols_, rows_, std::move(entries));
  }

  /// Row-major dense materialization.
  std::vector<double> to_dense() const {
    std::vector<double> out(rows_ * cols_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
        out[r * cols_ + static_cast<std::size_t>(col_[k])] = val_[k];
      }
    }
    return out;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<NodeId> col_;
  std::vector<double> val_;
};

}  // namespace hgcl
