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

// Cross-view meta network. Each node's context (interaction-view embedding,
// auxiliary embedding and the plain sum of its interaction neighbors) drives
// two small MLPs whose outputs are reshaped row-major into a d x k and a k x d
// factor. The auxiliary embedding is mapped through their product, so the
// per-node transform has rank at most k.

#pragma once

#include <algorithm>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hgcl/ops.hpp"
#include "hgcl/sparse.hpp"
#include "hgcl/tape.hpp"
#include "hgcl/tensor.hpp"

namespace hgcl {

struct LinearVars {
  Var weight;  // in x out
  Var bias;    // out
};

/// Two fully connected layers with a PReLU in between.
struct MetaMlpVars {
  LinearVars fc1;
  Var slope;
  LinearVars fc2;
};

template <typename T>
Var linear(Tape<T>& tape, Var x, const LinearVars& l) {
  return ad::add_row_bias(tape, ad::matmul(tape, x, l.weight), l.bias);
}

template <typename T>
Var meta_mlp(Tape<T>& tape, Var x, const MetaMlpVars& mlp) {
  return linear(tape, ad::prelu(tape, linear(tape, x, mlp.fc1), mlp.slope), mlp.fc2);
}

/// [E_view | E_aux | B * E_other] where B is the 0/1 interaction incidence.
template <typename T>
Var extract_meta_knowledge(Tape<T>& tape, Var e_view, Var e_aux, const CsrMatrix& incidence, Var e_other) {
  Var neighbor_sum = ad::spmm(tape, incidence, e_other);
  return ad::concat_columns(tape, {e_view, e_aux, neighbor_sum});
}

struct TransformVars {
  Var w1;  // rows x d x k
  Var w2;  // rows x k x d
};

template <typename T>
TransformVars generate_transforms(Tape<T>& tape, Var meta, const MetaMlpVars& mlp1, const MetaMlpVars& mlp2,
                                  std::size_t d, std::size_t k) {
  const Shape& ms = tape.value(meta).shape();
  if (ms.rank() != 2 || ms[1] != 3 * d) {
    throw ShapeError("meta knowledge must be rows x " + std::to_string(3 * d) + ", got " + ms.str());
  }
  const std::size_t rows = ms[0];
  TransformVars t;
  t.w1 = ad::reshape(tape, meta_mlp(tape, meta, mlp1), Shape{rows, d, k});
  t.w2 = ad::reshape(tape, meta_mlp(tape, meta, mlp2), Shape{rows, k, d});
  return t;
}

/// PReLU(W1_r (W2_r e_r)) per row.
template <typename T>
Var apply_transform(Tape<T>& tape, const TransformVars& t, Var e_aux, Var slope) {
  return ad::prelu(tape, ad::batched_lowrank_apply(tape, t.w1, t.w2, e_aux), slope);
}

/// alpha * E_view + (1 - alpha) * (E_aux + E_aux^M). An invalid `e_aux_m`
/// drops the transformed term.
template <typename T>
Var fuse_final(Tape<T>& tape, Var e_view, Var e_aux, Var e_aux_m, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("fusion weight must lie in [0, 1], got " + std::to_string(alpha));
  }
  Var aux = e_aux_m.valid() ? ad::add(tape, e_aux, e_aux_m) : e_aux;
  return ad::add(tape, ad::scale(tape, e_view, static_cast<T>(alpha)), ad::scale(tape, aux, static_cast<T>(1.0 - alpha)));
}

/// Materializes W1_r * W2_r as a d x d matrix.
template <typename T>
Tensor<double> transform_matrix(const Tensor<T>& w1, const Tensor<T>& w2, std::size_t row) {
  if (w1.shape().rank() != 3 || w2.shape().rank() != 3) throw ShapeError("transform factors must be rank 3");
  const std::size_t rows = w1.shape()[0], d = w1.shape()[1], k = w1.shape()[2];
  require_shape(w2.shape(), Shape{rows, k, d}, "transform_matrix W2");
  if (row >= rows) throw std::out_of_range("node " + std::to_string(row) + " outside " + std::to_string(rows) + " rows");
  Tensor<double> out(Shape{d, d});
  const T* a = w1.data() + row * d * k;
  const T* b = w2.data() + row * k * d;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += static_cast<double>(a[i * k + p]) * static_cast<double>(b[p * d + j]);
      out[i * d + j] = acc;
    }
  }
  return out;
}

/// CSV with header "row,col,value"; values carry 17 significant digits so
/// they parse back to the identical double.
inline void write_transform_csv(std::ostream& os, const Tensor<double>& mat) {
  os << "row,col,value\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < mat.rows(); ++i) {
    for (std::size_t j = 0; j < mat.cols(); ++j) os << i << ',' << j << ',' << mat.at(i, j) << '\n';
  }
}

inline Tensor<double> read_transform_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "row,col,value") throw std::runtime_error("transform CSV: bad header");
  struct Entry {
    std::size_t r, c;
    double v;
  };
  std::vector<Entry> entries;
  std::size_t d = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    Entry e{};
    char c1 = 0, c2 = 0;
    if (!(ls >> e.r >> c1 >> e.c >> c2 >> e.v) || c1 != ',' || c2 != ',') {
      throw std::runtime_error("transform CSV: malformed line '" + line + "'");
    }
    d = std::max({d, e.r + 1, e.c + 1});
    entries.push_back(e);
  }
  Tensor<double> out(Shape{d, d});
  for (const auto& e : entries) out.at(e.r, e.c) = e.v;
  return out;
}

}  // namespace hgcl
