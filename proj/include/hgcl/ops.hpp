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

// Differentiable primitives recorded on a Tape. Each function computes the
// forward value eagerly and registers the exact adjoint. Sparse operands are
// captured by pointer and must outlive the tape.

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hgcl/sparse.hpp"
#include "hgcl/tape.hpp"
#include "hgcl/tensor.hpp"

namespace hgcl::ad {

/// Row norms below this are treated as zero rows by normalization and cosine.
inline constexpr double kTinyNorm = 1e-12;

namespace detail {

template <typename T>
void require_matrix(const Tensor<T>& t, const char* op) {
  if (t.shape().rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + t.shape().str());
}

template <typename T>
T stable_log_sigmoid(T x) {
  return x >= T(0) ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace detail

/// A * X for a sparse A (rows x cols) and dense X (cols x d).
template <typename T>
Var spmm(Tape<T>& tape, const CsrMatrix& a, Var x) {
  const Tensor<T>& xv = tape.value(x);
  detail::require_matrix(xv, "spmm");
  if (xv.rows() != a.cols()) {
    throw ShapeError("spmm: sparse matrix has " + std::to_string(a.cols()) + " columns, dense operand has " +
                     std::to_string(xv.rows()) + " rows");
  }
  const std::size_t d = xv.cols();
  Tensor<T> out(Shape{a.rows(), d});
  for (std::size_t r = 0; r < a.rows(); ++r) {
    T* dst = out.data() + r * d;
    for (std::size_t k = a.row_begin(r); k < a.row_end(r); ++k) {
      const T w = static_cast<T>(a.value(k));
      const T* src = xv.data() + static_cast<std::size_t>(a.col(k)) * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += w * src[j];
    }
  }
  const CsrMatrix* mat = &a;
  return tape.record("spmm", std::move(out), {x}, [mat, x, d](Tape<T>& tp, std::size_t self) {
    const Tensor<T>& g = tp.node_grad(self);
    Tensor<T>& gx = tp.grad_accumulator(x);
    for (std::size_t r = 0; r < mat->rows(); ++r) {
      const T* grow = g.data() + r * d;
      for (std::size_t k = mat->row_begin(r); k < mat->row_end(r); ++k) {
        const T w = static_cast<T>(mat->value(k));
        T* dst = gx.data() + static_cast<std::size_t>(mat->col(k)) * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += w * grow[j];
      }
    }
  });
}

/// Dense (p x q) * (q x r).
template <typename T>
Var matmul(Tape<T>& tape, Var a, Var b) {
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  detail::require_matrix(av, "matmul");
  detail::require_matrix(bv, "matmul");
  const std::size_t p = av.rows(), q = av.cols(), r = bv.cols();
  if (bv.rows() != q) throw ShapeError("matmul: inner dimensions " + av.shape().str() + " * " + bv.shape().str());
  Tensor<T> out(Shape{p, r});
  for (std::size_t i = 0; i < p; ++i) {
    T* dst = out.data() + i * r;
    for (std::size_t k = 0; k < q; ++k) {
      const T aik = av[i * q + k];
      const T* brow = bv.data() + k * r;
      for (std::size_t j = 0; j < r; ++j) dst[j] += aik * brow[j];
    }
  }
  return tape.record("matmul", std::move(out), {a, b}, [a, b, p, q, r](Tape<T>& tp, std::size_t self) {
    const Tensor<T>& g = tp.node_grad(self);
    const Tensor<T>& av = tp.value(a);
    const Tensor<T>& bv = tp.value(b);
    if (tp.requires_grad(a)) {
      Tensor<T>& ga = tp.grad_accumulator(a);
      for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t k = 0; k < q; ++k) {
          T acc = 0;
          for (std::size_t j = 0; j < r; ++j) acc += g[i * r + j] * bv[k * r + j];
          ga[i * q + k] += acc;
        }
      }
    }
    if (tp.requires_grad(b)) {
      Tensor<T>& gb = tp.grad_accumulator(b);
      for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t k = 0; k < q; ++k) {
          const T aik = av[i * q + k];
          for (std::size_t j = 0; j < r; ++j) gb[k * r + j] += aik * g[i * r + j];
        }
      }
    }
  });
}

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  require_shape(bv.shape(), av.shape(), "add");
  Tensor<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return tape.record("add", std::move(out), {a, b}, [a, b](Tape<T>& tp, std::size_t self) {
    const Tensor<T>& g = tp.node_grad(self);
    for (Var in : {a, b}) {
      if (!tp.requires_grad(in)) continue;
      Tensor<T>& gi = tp.grad_accumulator(in);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

template <typename T>
Var sub(Tape<T>& tape, Var a, Var b) {
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  require_shape(bv.shape(), av.shape(), "sub");
  Tensor<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return tape.record("sub", std::move(out), {a, b}, [a, b](Tape<T>& tp, std::size_t self) {
    const Tensor<T>& g = tp.node_grad(self);
    if (tp.requires_grad(a)) {
      Tensor<T>& ga = tp.grad_accumulator(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tp.requires_grad(b)) {
      Tensor<T>& gb = tp.grad_accumulator(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

/// Elementwise (Hadamard) product.
template <typename T>
Var mul(Tape<T>& tape, Var a, Var b) {
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  require_shape(bv.shape(), av.shape(), "mul");
  Tensor<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return tape.record("mul", std::move(out), {a, b}, [a, b](Tape<T>& tp, std::size_t self) {
    const Tensor<T>& g = tp.node_grad(self);
    const Tensor<T>& av = tp.value(a);
    const Tensor<T>& bv = tp.value(b);
    if (tp.requires_grad(a)) {
      Tensor<T>& ga = tp.grad_accumulator(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tp.requires_grad(b)) {
      Tensor<T>& gb = tp.grad_accumulator(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

/// c * x for a constant c.
template <typename T>
Var scale(Tape<T>& tape, Var x, T c) {
  Tensor<T> out = tape.value(x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
  return tape.record("scale", std::move(out), {x}, [x, c](Tape<T>& tp, std::size_t self) {
    const Tensor<T>& g = tp.node_grad(self);
    Tensor<T>& gx = tp.grad_accumulator(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += c * g[i];
  });
}

/// Adds a bias vector of length q to every row of a p x q matrix.
template <typename T>
Var add_row_bias(Tape<T>& tape, Var x, Var bias) {
  const Tensor<T>& xv = tape.value(x);
  const Tensor<T>& bv = tape.value(bias);
  detail::require_matrix(xv, "add_row_bias");
  const std::size_t p = xv.rows(), q = xv.cols();
  require_shape(bv.shape(), Shape{q}, "add_row_bias");
  Tensor<T> out = xv;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < q; ++j) out[i * q + j] += bv[j];
  }
  return tape.record("add_row_bias", std::move(out), {x, bias}, [x, bias, p, q](Tape<T>& tp, std::size_t self) {
    const Tensor<T>& g = tp.node_grad(self);
    if (tp.requires_grad(x)) {
      Tensor<T>& gx = tp.grad_accumulator(x);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (tp.requires_grad(bias)) {
      Tensor<T>& gb = tp.grad_accumulator(bias);
      for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < q; ++j) gb[j] += g[i * q + j];
      }
    }
  });
}

template <typename T>
Var sigmoid(Tape<T>& tape, Var x) {
  Tensor<T> out = tape.value(x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::sigmoid(out[i]);
  return tape.record("sigmoid", std::move(out), {x}, [x](Tape<T>& tp, std::size_t self) {
    const Tensor<T>& g = tp.node_grad(self);
    const Tensor<T>& y = tp.node_value(self);
    Tensor<T>& gx = tp.grad_accumulator(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (T(1) - y[i]);
  });
}

/// log(sigmoid(x)), evaluated without overflow for large |x|.
template <typename T>
Var log_sigmoid(Tape<T>& tape, Var x) {
  Tensor<T> out = tape.value(x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::stable_log_sigmoid(out[i]);
  return tape.record("log_sigmoid", std::move(out), {x}, [x](Tape<T>& tp, std::size_t self) {
    const Tensor<T>& g = tp.node_grad(self);
    const Tensor<T>& xv = tp.value(x);
    Tensor<T>& gx = tp.grad_accumulator(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * detail::sigmoid(-xv[i]);
  });
}

/// PReLU with one shared scalar slope applied where x <= 0.
template <typename T>
Var prelu(Tape<T>& tape, Var x, Var slope) {
  const Tensor<T>& xv = tape.value(x);
  const Tensor<T>& sv = tape.value(slope);
  if (sv.size() != 1) throw ShapeError("prelu: slope must be a scalar, got " + sv.shape().str());
  const T a = sv[0];
  Tensor<T> out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const bool positive = xv[i] > T(0);
    tape.note_branch(positive);
    if (!positive) out[i] = a * xv[i];
  }
  return tape.record("prelu", std::move(out), {x, slope}, [x, slope](Tape<T>& tp, std::size_t self) {
    const Tensor<T>& g = tp.node_grad(self);
    const Tensor<T>& xv = tp.value(x);
    const T a = tp.value(slope)[0];
    if (tp.requires_grad(x)) {
      Tensor<T>& gx = tp.grad_accumulator(x);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += xv[i] > T(0) ? g[i] : a * g[i];
    }
    if (tp.requires_grad(slope)) {
      T acc = 0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(xv[i] > T(0))) acc += g[i] * xv[i];
      }
      tp.grad_accumulator(slope)[0] += acc;
    }
  });
}

/// Scales each row to unit L2 norm. Rows with norm below kTinyNorm pass through
/// unchanged with an identity adjoint.
template <typename T>
Var row_l2_normalize(Tape<T>& tape, Var x) {
  const Tensor<T>& xv = tape.value(x);
  detail::require_matrix(xv, "row_l2_normalize");
  const std::size_t rows = xv.rows(), d = xv.cols();
  Tensor<T> out = xv;
  std::vector<T> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    T ss = 0;
    for (std::size_t j = 0; j < d; ++j) ss += xv[r * d + j] * xv[r * d + j];
    norms[r] = std::sqrt(ss);
    const bool pass = norms[r] < T(kTinyNorm);
    tape.note_branch(pass);
    if (!pass) {
      for (std::size_t j = 0; j < d; ++j) out[r * d + j] /= norms[r];
    }
  }
  return tape.record("row_l2_normalize", std::move(out), {x},
                     [x, rows, d, norms = std::move(norms)](Tape<T>& tp, std::size_t self) {
                       const Tensor<T>& g = tp.node_grad(self);
                       const Tensor<T>& y = tp.node_value(self);
                       Tensor<T>& gx = tp.grad_accumulator(x);
                       for (std::size_t r = 0; r < rows; ++r) {
                         if (norms[r] < T(kTinyNorm)) {
                           for (std::size_t j = 0; j < d; ++j) gx[r * d + j] += g[r * d + j];
                           continue;
                         }
                         T dot = 0;
                         for (std::size_t j = 0; j < d; ++j) dot += y[r * d + j] * g[r * d + j];
                         for (std::size_t j = 0; j < d; ++j) {
                           gx[r * d + j] += (g[r * d + j] - y[r * d + j] * dot) / norms[r];
                         }
                       }
                     });
}

/// Horizontal concatenation of matrices with equal row counts.
template <typename T>
Var concat_columns(Tape<T>& tape, const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_columns: no inputs");
  const std::size_t rows = tape.value(parts.front()).rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor<T>& v = tape.value(p);
    detail::require_matrix(v, "concat_columns");
    if (v.rows() != rows) throw ShapeError("concat_columns: row counts differ");
    widths.push_back(v.cols());
    total += v.cols();
  }
  Tensor<T> out(Shape{rows, total});
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor<T>& v = tape.value(parts[p]);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < widths[p]; ++j) out[r * total + offset + j] = v[r * widths[p] + j];
    }
    offset += widths[p];
  }
  return tape.record("concat_columns", std::move(out), parts,
                     [parts, widths, rows, total](Tape<T>& tp, std::size_t self) {
                       const Tensor<T>& g = tp.node_grad(self);
                       std::size_t offset = 0;
                       for (std::size_t p = 0; p < parts.size(); ++p) {
                         if (tp.requires_grad(parts[p])) {
                           Tensor<T>& gp = tp.grad_accumulator(parts[p]);
                           for (std::size_t r = 0; r < rows; ++r) {
                             for (std::size_t j = 0; j < widths[p]; ++j) {
                               gp[r * widths[p] + j] += g[r * total + offset + j];
                             }
                           }
                         }
                         offset += widths[p];
                       }
                     });
}

/// Selects rows by index; the adjoint scatter-adds, so repeated indices accumulate.
template <typename T>
Var gather_rows(Tape<T>& tape, Var x, std::vector<NodeId> index) {
  const Tensor<T>& xv = tape.value(x);
  detail::require_matrix(xv, "gather_rows");
  const std::size_t d = xv.cols();
  Tensor<T> out(Shape{index.size(), d});
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] < 0 || static_cast<std::size_t>(index[r]) >= xv.rows()) {
      throw std::out_of_range("gather_rows: index " + std::to_string(index[r]) + " outside " +
                              std::to_string(xv.rows()) + " rows");
    }
    const T* src = xv.data() + static_cast<std::size_t>(index[r]) * d;
    std::copy(src, src + d, out.data() + r * d);
  }
  return tape.record("gather_rows", std::move(out), {x},
                     [x, d, index = std::move(index)](Tape<T>& tp, std::size_t self) {
                       const Tensor<T>& g = tp.node_grad(self);
                       Tensor<T>& gx = tp.grad_accumulator(x);
                       for (std::size_t r = 0; r < index.size(); ++r) {
                         T* dst = gx.data() + static_cast<std::size_t>(index[r]) * d;
                         for (std::size_t j = 0; j < d; ++j) dst[j] += g[r * d + j];
                       }
                     });
}

template <typename T>
Var reshape(Tape<T>& tape, Var x, Shape shape) {
  const Tensor<T>& xv = tape.value(x);
  if (xv.size() != shape.numel()) {
    throw ShapeError("reshape: cannot view " + xv.shape().str() + " as " + shape.str());
  }
  Tensor<T> out(shape, std::vector<T>(xv.values().begin(), xv.values().end()));
  return tape.record("reshape", std::move(out), {x}, [x](Tape<T>& tp, std::size_t self) {
    const Tensor<T>& g = tp.node_grad(self);
    Tensor<T>& gx = tp.grad_accumulator(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

/// Per row r: W1_r (d x k) * (W2_r (k x d) * x_r). The d x d product is never formed.
template <typename T>
Var batched_lowrank_apply(Tape<T>& tape, Var w1, Var w2, Var x) {
  const Tensor<T>& a = tape.value(w1);
  const Tensor<T>& b = tape.value(w2);
  const Tensor<T>& xv = tape.value(x);
  detail::require_matrix(xv, "batched_lowrank_apply");
  if (a.shape().rank() != 3) throw ShapeError("batched_lowrank_apply: W1 must be rank 3");
  const std::size_t m = xv.rows(), d = xv.cols(), k = a.shape()[2];
  require_shape(a.shape(), Shape{m, d, k}, "batched_lowrank_apply W1");
  require_shape(b.shape(), Shape{m, k, d}, "batched_lowrank_apply W2");
  Tensor<T> out(Shape{m, d});
  Tensor<T> mid(Shape{m, k});
  for (std::size_t r = 0; r < m; ++r) {
    const T* ar = a.data() + r * d * k;
    const T* br = b.data() + r * k * d;
    const T* xr = xv.data() + r * d;
    T* tr = mid.data() + r * k;
    for (std::size_t p = 0; p < k; ++p) {
      T acc = 0;
      for (std::size_t j = 0; j < d; ++j) acc += br[p * d + j] * xr[j];
      tr[p] = acc;
    }
    T* yr = out.data() + r * d;
    for (std::size_t i = 0; i < d; ++i) {
      T acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += ar[i * k + p] * tr[p];
      yr[i] = acc;
    }
  }
  return tape.record(
      "batched_lowrank_apply", std::move(out), {w1, w2, x},
      [w1, w2, x, m, d, k, mid = std::move(mid)](Tape<T>& tp, std::size_t self) {
        const Tensor<T>& g = tp.node_grad(self);
        const Tensor<T>& a = tp.value(w1);
        const Tensor<T>& b = tp.value(w2);
        const Tensor<T>& xv = tp.value(x);
        std::vector<T> dt(k);
        for (std::size_t r = 0; r < m; ++r) {
          const T* ar = a.data() + r * d * k;
          const T* br = b.data() + r * k * d;
          const T* xr = xv.data() + r * d;
          const T* gr = g.data() + r * d;
          const T* tr = mid.data() + r * k;
          for (std::size_t p = 0; p < k; ++p) {
            T acc = 0;
            for (std::size_t i = 0; i < d; ++i) acc += ar[i * k + p] * gr[i];
            dt[p] = acc;
          }
          if (tp.requires_grad(w1)) {
            T* ga = tp.grad_accumulator(w1).data() + r * d * k;
            for (std::size_t i = 0; i < d; ++i) {
              for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += gr[i] * tr[p];
            }
          }
          if (tp.requires_grad(w2)) {
            T* gb = tp.grad_accumulator(w2).data() + r * k * d;
            for (std::size_t p = 0; p < k; ++p) {
              for (std::size_t j = 0; j < d; ++j) gb[p * d + j] += dt[p] * xr[j];
            }
          }
          if (tp.requires_grad(x)) {
            T* gx = tp.grad_accumulator(x).data() + r * d;
            for (std::size_t j = 0; j < d; ++j) {
              T acc = 0;
              for (std::size_t p = 0; p < k; ++p) acc += br[p * d + j] * dt[p];
              gx[j] += acc;
            }
          }
        }
      });
}

/// Pairwise cosine similarities between rows of A (M x d) and B (N x d).
/// A zero-norm row yields similarity 0 and receives no gradient.
template <typename T>
Var cosine_sim_matrix(Tape<T>& tape, Var a, Var b, std::size_t* zero_rows = nullptr) {
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  detail::require_matrix(av, "cosine_sim_matrix");
  detail::require_matrix(bv, "cosine_sim_matrix");
  const std::size_t M = av.rows(), N = bv.rows(), d = av.cols();
  if (bv.cols() != d) throw ShapeError("cosine_sim_matrix: embedding widths differ");

  auto unit_rows = [d](const Tensor<T>& src, std::vector<T>& norms, std::size_t& zeros) {
    Tensor<T> unit = src;
    norms.assign(src.rows(), T(0));
    for (std::size_t r = 0; r < src.rows(); ++r) {
      T ss = 0;
      for (std::size_t j = 0; j < d; ++j) ss += src[r * d + j] * src[r * d + j];
      norms[r] = std::sqrt(ss);
      if (norms[r] < T(kTinyNorm)) {
        ++zeros;
        for (std::size_t j = 0; j < d; ++j) unit[r * d + j] = T(0);
      } else {
        for (std::size_t j = 0; j < d; ++j) unit[r * d + j] /= norms[r];
      }
    }
    return unit;
  };
  std::size_t zeros = 0;
  std::vector<T> na, nb;
  Tensor<T> ua = unit_rows(av, na, zeros);
  Tensor<T> ub = unit_rows(bv, nb, zeros);
  if (zero_rows) *zero_rows = zeros;

  Tensor<T> out(Shape{M, N});
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      T acc = 0;
      for (std::size_t c = 0; c < d; ++c) acc += ua[i * d + c] * ub[j * d + c];
      out[i * N + j] = acc;
    }
  }
  return tape.record(
      "cosine_sim_matrix", std::move(out), {a, b},
      [a, b, M, N, d, ua = std::move(ua), ub = std::move(ub), na = std::move(na), nb = std::move(nb)](
          Tape<T>& tp, std::size_t self) {
        const Tensor<T>& g = tp.node_grad(self);
        // d(unit)/d(raw) = (I - u u^T) / norm, applied row by row.
        auto push_back = [d](const Tensor<T>& unit, const std::vector<T>& norms, std::vector<T>& dunit,
                             Tensor<T>& graw) {
          for (std::size_t r = 0; r < norms.size(); ++r) {
            if (norms[r] < T(kTinyNorm)) continue;
            T dot = 0;
            for (std::size_t c = 0; c < d; ++c) dot += unit[r * d + c] * dunit[r * d + c];
            for (std::size_t c = 0; c < d; ++c) {
              graw[r * d + c] += (dunit[r * d + c] - unit[r * d + c] * dot) / norms[r];
            }
          }
        };
        if (tp.requires_grad(a)) {
          std::vector<T> dua(M * d, T(0));
          for (std::size_t i = 0; i < M; ++i) {
            for (std::size_t j = 0; j < N; ++j) {
              const T gij = g[i * N + j];
              for (std::size_t c = 0; c < d; ++c) dua[i * d + c] += gij * ub[j * d + c];
            }
          }
          push_back(ua, na, dua, tp.grad_accumulator(a));
        }
        if (tp.requires_grad(b)) {
          std::vector<T> dub(N * d, T(0));
          for (std::size_t i = 0; i < M; ++i) {
            for (std::size_t j = 0; j < N; ++j) {
              const T gij = g[i * N + j];
              for (std::size_t c = 0; c < d; ++c) dub[j * d + c] += gij * ua[i * d + c];
            }
          }
          push_back(ub, nb, dub, tp.grad_accumulator(b));
        }
      });
}

/// log(sum_j exp(x_ij)) per row, shifted by the row max.
template <typename T>
Var logsumexp_rows(Tape<T>& tape, Var x) {
  const Tensor<T>& xv = tape.value(x);
  detail::require_matrix(xv, "logsumexp_rows");
  const std::size_t M = xv.rows(), N = xv.cols();
  if (N == 0) throw ShapeError("logsumexp_rows: empty rows");
  Tensor<T> out(Shape{M});
  for (std::size_t i = 0; i < M; ++i) {
    T mx = xv[i * N];
    for (std::size_t j = 1; j < N; ++j) mx = std::max(mx, xv[i * N + j]);
    T s = 0;
    for (std::size_t j = 0; j < N; ++j) s += std::exp(xv[i * N + j] - mx);
    out[i] = mx + std::log(s);
  }
  return tape.record("logsumexp_rows", std::move(out), {x}, [x, M, N](Tape<T>& tp, std::size_t self) {
    const Tensor<T>& g = tp.node_grad(self);
    const Tensor<T>& y = tp.node_value(self);
    const Tensor<T>& xv = tp.value(x);
    Tensor<T>& gx = tp.grad_accumulator(x);
    for (std::size_t i = 0; i < M; ++i) {
      for (std::size_t j = 0; j < N; ++j) gx[i * N + j] += g[i] * std::exp(xv[i * N + j] - y[i]);
    }
  });
}

/// Main diagonal of a square matrix.
template <typename T>
Var diagonal(Tape<T>& tape, Var x) {
  const Tensor<T>& xv = tape.value(x);
  detail::require_matrix(xv, "diagonal");
  const std::size_t M = xv.rows();
  if (xv.cols() != M) throw ShapeError("diagonal: matrix is not square " + xv.shape().str());
  Tensor<T> out(Shape{M});
  for (std::size_t i = 0; i < M; ++i) out[i] = xv[i * M + i];
  return tape.record("diagonal", std::move(out), {x}, [x, M](Tape<T>& tp, std::size_t self) {
    const Tensor<T>& g = tp.node_grad(self);
    Tensor<T>& gx = tp.grad_accumulator(x);
    for (std::size_t i = 0; i < M; ++i) gx[i * M + i] += g[i];
  });
}

/// Row-wise inner product of two equally shaped matrices.
template <typename T>
Var row_dot(Tape<T>& tape, Var a, Var b) {
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  detail::require_matrix(av, "row_dot");
  require_shape(bv.shape(), av.shape(), "row_dot");
  const std::size_t M = av.rows(), d = av.cols();
  Tensor<T> out(Shape{M});
  for (std::size_t i = 0; i < M; ++i) {
    T acc = 0;
    for (std::size_t c = 0; c < d; ++c) acc += av[i * d + c] * bv[i * d + c];
    out[i] = acc;
  }
  return tape.record("row_dot", std::move(out), {a, b}, [a, b, M, d](Tape<T>& tp, std::size_t self) {
    const Tensor<T>& g = tp.node_grad(self);
    const Tensor<T>& av = tp.value(a);
    const Tensor<T>& bv = tp.value(b);
    if (tp.requires_grad(a)) {
      Tensor<T>& ga = tp.grad_accumulator(a);
      for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t c = 0; c < d; ++c) ga[i * d + c] += g[i] * bv[i * d + c];
      }
    }
    if (tp.requires_grad(b)) {
      Tensor<T>& gb = tp.grad_accumulator(b);
      for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t c = 0; c < d; ++c) gb[i * d + c] += g[i] * av[i * d + c];
      }
    }
  });
}

/// Sum of all entries, as a scalar.
template <typename T>
Var sum(Tape<T>& tape, Var x) {
  T acc = 0;
  for (T v : tape.value(x).values()) acc += v;
  return tape.record("sum", Tensor<T>::scalar(acc), {x}, [x](Tape<T>& tp, std::size_t self) {
    const T g = tp.node_grad(self)[0];
    Tensor<T>& gx = tp.grad_accumulator(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

/// Squared Frobenius norm, as a scalar.
template <typename T>
Var sum_squares(Tape<T>& tape, Var x) {
  T acc = 0;
  for (T v : tape.value(x).values()) acc += v * v;
  return tape.record("sum_squares", Tensor<T>::scalar(acc), {x}, [x](Tape<T>& tp, std::size_t self) {
    const T g = tp.node_grad(self)[0];
    const Tensor<T>& xv = tp.value(x);
    Tensor<T>& gx = tp.grad_accumulator(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += T(2) * g * xv[i];
  });
}

}  // namespace hgcl::ad
