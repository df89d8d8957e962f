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
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "hgcl/tape.hpp"
#include "hgcl/tensor.hpp"

namespace hgcl {

struct GradCheckOptions {
  double eps = 1e-5;
  // Above this many coordinates only a seeded subset of `sample_size` is probed.
  std::size_t exhaustive_limit = 20000;
  std::size_t sample_size = 256;
  std::uint64_t seed = 7;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;  // coordinates whose +-eps probe crosses a kink
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
};

/// Compares reverse-mode gradients with central differences
/// (f(x + eps e) - f(x - eps e)) / 2eps. `build(tape, leaves)` must record a
/// deterministic scalar loss from the given trainable leaves. A probe whose
/// branch signature differs from the base evaluation straddles a
/// non-differentiable point and is excluded.
template <typename Builder>
GradCheckResult grad_check(Builder&& build, std::vector<Tensor<double>> inputs, const GradCheckOptions& opts = {}) {
  struct Eval {
    double loss;
    std::vector<bool> signature;
  };
  auto evaluate = [&](bool with_grad, std::vector<Tensor<double>>* grads) {
    Tape<double> tape;
    std::vector<Var> leaves;
    leaves.reserve(inputs.size());
    for (const auto& t : inputs) leaves.push_back(tape.parameter(t));
    Var loss = build(tape, leaves);
    if (tape.value(loss).size() != 1) throw TapeError("grad_check: loss is not scalar");
    Eval e{tape.value(loss)[0], tape.branch_signature()};
    if (with_grad) {
      tape.finalize();
      tape.backward(loss);
      grads->clear();
      for (Var v : leaves) grads->push_back(tape.grad(v));
    }
    return e;
  };

  std::vector<Tensor<double>> analytic;
  const Eval base = evaluate(true, &analytic);

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    for (std::size_t i = 0; i < inputs[t].size(); ++i) coords.emplace_back(t, i);
  }
  if (coords.size() > opts.exhaustive_limit) {
    std::mt19937_64 rng(opts.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(std::max<std::size_t>(opts.sample_size, 200));
  }

  GradCheckResult result;
  for (auto [t, i] : coords) {
    const double orig = inputs[t][i];
    inputs[t][i] = orig + opts.eps;
    const Eval plus = evaluate(false, nullptr);
    inputs[t][i] = orig - opts.eps;
    const Eval minus = evaluate(false, nullptr);
    inputs[t][i] = orig;
    if (plus.signature != base.signature || minus.signature != base.signature) {
      ++result.excluded;
      continue;
    }
    const double numeric = (plus.loss - minus.loss) / (2.0 * opts.eps);
    const double a = analytic[t][i];
    const double rel = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-12);
    ++result.checked;
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_input = t;
      result.worst_index = i;
    }
  }
  return result;
}

}  // namespace hgcl
