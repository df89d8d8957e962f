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

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "hgcl/grad_check.hpp"
#include "hgcl/ops.hpp"
#include "hgcl/tape.hpp"
#include "test_util.hpp"

namespace hgcl {
namespace {

using testing::random_tensor;
using Builder = std::function<Var(Tape<double>&, const std::vector<Var>&)>;

// Contracts an arbitrary output with fixed pseudo-random weights so that every
// output coordinate influences the scalar loss differently.
Var contract(Tape<double>& tape, Var v) {
  std::mt19937_64 rng(99);
  Var w = tape.constant(random_tensor(tape.value(v).shape(), rng, 0.5, 1.5));
  return ad::sum(tape, ad::mul(tape, v, w));
}

CsrMatrix small_sparse() {
  return CsrMatrix::from_triplets(5, 4, {{{0, 1}, 0.5}, {{1, 0}, -1.0}, {{1, 3}, 2.0}, {{3, 2}, 0.25}, {{4, 1}, 1.5}, {{4, 3}, -0.75}});
}

struct PrimitiveCase {
  std::string name;
  std::vector<Shape> inputs;
  Builder build;
};

std::vector<PrimitiveCase> primitive_cases() {
  static const CsrMatrix a = small_sparse();
  return {
      {"spmm", {Shape{4, 3}}, [](Tape<double>& t, const std::vector<Var>& v) { return contract(t, ad::spmm(t, a, v[0])); }},
      {"matmul", {Shape{4, 3}, Shape{3, 2}}, [](Tape<double>& t, const std::vector<Var>& v) { return contract(t, ad::matmul(t, v[0], v[1])); }},
      {"add", {Shape{4, 3}, Shape{4, 3}}, [](Tape<double>& t, const std::vector<Var>& v) { return contract(t, ad::add(t, v[0], v[1])); }},
      {"sub", {Shape{4, 3}, Shape{4, 3}}, [](Tape<double>& t, const std::vector<Var>& v) { return contract(t, ad::sub(t, v[0], v[1])); }},
      {"mul", {Shape{4, 3}, Shape{4, 3}}, [](Tape<double>& t, const std::vector<Var>& v) { return contract(t, ad::mul(t, v[0], v[1])); }},
      {"scale", {Shape{4, 3}}, [](Tape<double>& t, const std::vector<Var>& v) { return contract(t, ad::scale(t, v[0], 1.7)); }},
      {"add_row_bias", {Shape{4, 3}, Shape{3}}, [](Tape<double>& t, const std::vector<Var>& v) { return contract(t, ad::add_row_bias(t, v[0], v[1])); }},
      {"sigmoid", {Shape{4, 3}}, [](Tape<double>& t, const std::vector<Var>& v) { return contract(t, ad::sigmoid(t, v[0])); }},
      {"log_sigmoid", {Shape{4, 3}}, [](Tape<double>& t, const std::vector<Var>& v) { return contract(t, ad::log_sigmoid(t, v[0])); }},
      {"prelu", {Shape{4, 3}, Shape{}}, [](Tape<double>& t, const std::vector<Var>& v) { return contract(t, ad::prelu(t, v[0], v[1])); }},
      {"row_l2_normalize", {Shape{4, 3}}, [](Tape<double>& t, const std::vector<Var>& v) { return contract(t, ad::row_l2_normalize(t, v[0])); }},
      {"concat_columns", {Shape{4, 2}, Shape{4, 3}}, [](Tape<double>& t, const std::vector<Var>& v) { return contract(t, ad::concat_columns(t, {v[0], v[1]})); }},
      {"gather_rows", {Shape{5, 3}}, [](Tape<double>& t, const std::vector<Var>& v) { return contract(t, ad::gather_rows(t, v[0], {0, 2, 2, 4})); }},
      {"reshape", {Shape{4, 6}}, [](Tape<double>& t, const std::vector<Var>& v) { return contract(t, ad::reshape(t, v[0], Shape{4, 2, 3})); }},
      {"batched_lowrank_apply", {Shape{4, 3, 2}, Shape{4, 2, 3}, Shape{4, 3}},
       [](Tape<double>& t, const std::vector<Var>& v) { return contract(t, ad::batched_lowrank_apply(t, v[0], v[1], v[2])); }},
      {"cosine_sim_matrix", {Shape{4, 3}, Shape{5, 3}}, [](Tape<double>& t, const std::vector<Var>& v) { return contract(t, ad::cosine_sim_matrix(t, v[0], v[1])); }},
      {"logsumexp_rows", {Shape{4, 5}}, [](Tape<double>& t, const std::vector<Var>& v) { return contract(t, ad::logsumexp_rows(t, v[0])); }},
      {"diagonal", {Shape{4, 4}}, [](Tape<double>& t, const std::vector<Var>& v) { return contract(t, ad::diagonal(t, v[0])); }},
      {"row_dot", {Shape{4, 3}, Shape{4, 3}}, [](Tape<double>& t, const std::vector<Var>& v) { return contract(t, ad::row_dot(t, v[0], v[1])); }},
      {"sum", {Shape{4, 3}}, [](Tape<double>& t, const std::vector<Var>& v) { return ad::sum(t, v[0]); }},
      {"sum_squares", {Shape{4, 3}}, [](Tape<double>& t, const std::vector<Var>& v) { return ad::sum_squares(t, v[0]); }},
  };
}

class PrimitiveGradient : public ::testing::TestWithParam<std::size_t> {};

TEST_P(PrimitiveGradient, MatchesCentralDifferencesOnTwentySeeds) {
  const PrimitiveCase c = primitive_cases()[GetParam()];
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<Tensor<double>> inputs;
    for (const Shape& s : c.inputs) inputs.push_back(random_tensor(s, rng));
    const auto res = grad_check(c.build, inputs);
    EXPECT_LT(res.max_rel_error, 1e-6) << c.name << " seed " << seed;
    EXPECT_GT(res.checked, 0u) << c.name;
  }
}

INSTANTIATE_TEST_SUITE_P(AllPrimitives, PrimitiveGradient, ::testing::Range<std::size_t>(0, primitive_cases().size()),
                         [](const ::testing::TestParamInfo<std::size_t>& info) { return primitive_cases()[info.param].name; });

TEST(Backward, SumGivesAllOnes) {
  Tape<double> tape;
  Var x = tape.parameter(Tensor<double>(Shape{2, 3, 2}, 0.7));
  Var loss = ad::sum(tape, x);
  tape.finalize();
  tape.backward(loss);
  for (double g : tape.grad(x).values()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SigmoidSlopeAtZeroIsAQuarter) {
  Tape<double> tape;
  Var x = tape.parameter(Tensor<double>(Shape{3, 2}, 0.0));
  Var loss = ad::sum(tape, ad::sigmoid(tape, x));
  tape.finalize();
  tape.backward(loss);
  for (double g : tape.grad(x).values()) EXPECT_DOUBLE_EQ(g, 0.25);
}

TEST(Backward, GradientsAccumulateAcrossUses) {
  Tape<double> tape;
  Var x = tape.parameter(Tensor<double>(Shape{2}, std::vector<double>{1.0, -3.0}));
  Var loss = ad::sum(tape, ad::add(tape, ad::mul(tape, x, x), ad::scale(tape, x, 2.0)));
  tape.finalize();
  tape.backward(loss);
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 4.0);
  EXPECT_DOUBLE_EQ(tape.grad(x)[1], -4.0);
}

TEST(Backward, ConstantsCarryNoGradient) {
  Tape<double> tape;
  Var x = tape.parameter(Tensor<double>(Shape{2}, 1.0));
  Var c = tape.constant(Tensor<double>(Shape{2}, 2.0));
  Var loss = ad::sum(tape, ad::mul(tape, x, c));
  tape.finalize();
  tape.backward(loss);
  EXPECT_EQ(tape.grad(x)[0], 2.0);
  EXPECT_FALSE(tape.requires_grad(c));
  EXPECT_THROW(tape.grad(c), TapeError);
}

TEST(Backward, RequiresFinalizedTapeAndScalarLoss) {
  Tape<double> tape;
  Var x = tape.parameter(Tensor<double>(Shape{2}, 1.0));
  Var loss = ad::sum(tape, x);
  EXPECT_THROW(tape.backward(loss), TapeError);
  EXPECT_THROW(tape.grad(x), TapeError);
  tape.finalize();
  EXPECT_THROW(tape.backward(x), TapeError);
  EXPECT_THROW(ad::sum(tape, x), TapeError);
  tape.backward(loss);
  EXPECT_THROW(tape.backward(loss), TapeError);
}

TEST(Backward, NonFiniteGradientNamesThePrimitive) {
  Tape<double> tape;
  Var x = tape.parameter(Tensor<double>(Shape{2}, 1.0));
  Var big = tape.constant(Tensor<double>(Shape{2}, std::numeric_limits<double>::infinity()));
  Var loss = ad::sum(tape, ad::mul(tape, x, big));
  tape.finalize();
  try {
    tape.backward(loss);
    FAIL() << "expected a TapeError";
  } catch (const TapeError& e) {
    EXPECT_NE(std::string(e.what()).find("'mul'"), std::string::npos) << e.what();
  }
}

TEST(Backward, ReplayIsBitIdentical) {
  std::mt19937_64 rng(5);
  const auto a = random_tensor(Shape{6, 3}, rng), b = random_tensor(Shape{6, 3}, rng);
  auto run = [&] {
    Tape<double> tape;
    Var x = tape.parameter(a), y = tape.parameter(b);
    Var s = ad::cosine_sim_matrix(tape, ad::row_l2_normalize(tape, x), y);
    Var loss = ad::sum(tape, ad::logsumexp_rows(tape, s));
    tape.finalize();
    tape.backward(loss);
    return std::make_pair(tape.grad(x), tape.grad(y));
  };
  const auto first = run(), second = run();
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(first.first[i], second.first[i]);
    EXPECT_EQ(first.second[i], second.second[i]);
  }
}

TEST(RowNormalize, UnitRowsAndTinyRowsPassThrough) {
  Tape<double> tape;
  Tensor<double> x(Shape{3, 2}, std::vector<double>{3, 4, 0, 0, 1e-14, 0});
  Var y = ad::row_l2_normalize(tape, tape.constant(x));
  const auto& v = tape.value(y);
  EXPECT_NEAR(std::hypot(v.at(0, 0), v.at(0, 1)), 1.0, 1e-12);
  EXPECT_EQ(v.at(1, 0), 0.0);
  EXPECT_EQ(v.at(2, 0), 1e-14);
}

TEST(Spmm, MatchesDenseOracleOnRandomGraphs) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<std::size_t> size(1, 50);
    const std::size_t rows = size(rng), cols = size(rng);
    const auto edges = testing::random_edges(rows, cols, 0.15, rng);
    std::vector<std::pair<Edge, double>> entries;
    std::uniform_real_distribution<double> w(-1, 1);
    for (auto e : edges) entries.push_back({e, w(rng)});
    const auto a = CsrMatrix::from_triplets(rows, cols, entries);
    const auto x = random_tensor(Shape{cols, 4}, rng);
    Tape<double> tape;
    Var y = ad::spmm(tape, a, tape.constant(x));
    EXPECT_LT(testing::max_abs_diff(tape.value(y), testing::dense_matmul(testing::dense_of(a), x)), 1e-10);
  }
}

TEST(LowRank, MatchesPerRowDenseProduct) {
  std::mt19937_64 rng(12);
  const std::size_t m = 7, d = 5, k = 2;
  const auto w1 = random_tensor(Shape{m, d, k}, rng), w2 = random_tensor(Shape{m, k, d}, rng), x = random_tensor(Shape{m, d}, rng);
  Tape<double> tape;
  Var y = ad::batched_lowrank_apply(tape, tape.constant(w1), tape.constant(w2), tape.constant(x));
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0;
      for (std::size_t j = 0; j < d; ++j) {
        double wij = 0;
        for (std::size_t p = 0; p < k; ++p) wij += w1[(r * d + i) * k + p] * w2[(r * k + p) * d + j];
        acc += wij * x.at(r, j);
      }
      EXPECT_NEAR(tape.value(y).at(r, i), acc, 1e-12);
    }
  }
}

TEST(Cosine, ZeroRowsScoreZero) {
  Tape<double> tape;
  Tensor<double> a(Shape{2, 2}, std::vector<double>{0, 0, 1, 0});
  Tensor<double> b(Shape{2, 2}, std::vector<double>{1, 0, 0, 1});
  std::size_t zero_rows = 0;
  Var s = ad::cosine_sim_matrix(tape, tape.constant(a), tape.constant(b), &zero_rows);
  EXPECT_EQ(zero_rows, 1u);
  EXPECT_EQ(tape.value(s).at(0, 0), 0.0);
  EXPECT_EQ(tape.value(s).at(1, 0), 1.0);
  EXPECT_EQ(tape.value(s).at(1, 1), 0.0);
}

TEST(GradCheck, LinearLossIsExact) {
  std::mt19937_64 rng(3);
  const auto w = random_tensor(Shape{6}, rng);
  auto build = [&](Tape<double>& t, const std::vector<Var>& v) { return ad::sum(t, ad::mul(t, v[0], t.constant(w))); };
  EXPECT_LT(grad_check(build, {random_tensor(Shape{6}, rng)}).max_rel_error, 1e-10);
}

TEST(GradCheck, PreluKinkIsExcluded) {
  Tensor<double> x(Shape{3}, std::vector<double>{0.0, 1.0, -1.0});
  auto build = [](Tape<double>& t, const std::vector<Var>& v) {
    return ad::sum(t, ad::prelu(t, v[0], t.constant(Tensor<double>::scalar(0.25))));
  };
  const auto res = grad_check(build, {x});
  EXPECT_EQ(res.excluded, 1u);
  EXPECT_EQ(res.checked, 2u);
  EXPECT_LT(res.max_rel_error, 1e-10);
}

TEST(GradCheck, RejectsNonScalarLoss) {
  auto build = [](Tape<double>& t, const std::vector<Var>& v) { return ad::scale(t, v[0], 2.0); };
  EXPECT_THROW(grad_check(build, {Tensor<double>(Shape{2}, 1.0)}), TapeError);
}

TEST(GradCheck, SamplesLargeInputs) {
  std::mt19937_64 rng(4);
  auto build = [](Tape<double>& t, const std::vector<Var>& v) { return ad::sum_squares(t, v[0]); };
  GradCheckOptions opts;
  opts.exhaustive_limit = 100;
  const auto res = grad_check(build, {random_tensor(Shape{30, 10}, rng)}, opts);
  EXPECT_GE(res.checked, 200u);
  EXPECT_LT(res.checked, 300u);
}

TEST(GradCheck, CompositeOfAllPrimitives) {
  const CsrMatrix a = CsrMatrix::from_triplets(4, 4, {{{0, 1}, 0.5}, {{1, 0}, 0.5}, {{2, 3}, 1.0}, {{3, 2}, 1.0}, {{1, 2}, 0.3}});
  auto build = [&](Tape<double>& t, const std::vector<Var>& v) {
    const std::size_t d = 3;
    Var e = v[0];                                                     // 4 x 3
    Var gate = ad::sigmoid(t, ad::add_row_bias(t, ad::matmul(t, e, v[1]), v[2]));
    Var h = ad::mul(t, e, gate);
    Var p = ad::spmm(t, a, h);
    Var n = ad::row_l2_normalize(t, ad::sub(t, p, ad::scale(t, h, 0.3)));
    Var cat = ad::concat_columns(t, {n, h});                          // 4 x 6
    Var w = ad::reshape(t, ad::prelu(t, ad::matmul(t, cat, v[3]), v[4]), Shape{4, d, 2});
    Var w2 = ad::reshape(t, ad::matmul(t, cat, v[5]), Shape{4, 2, d});
    Var m = ad::batched_lowrank_apply(t, w, w2, h);
    Var g = ad::gather_rows(t, m, {0, 2, 3, 3});
    Var s = ad::scale(t, ad::cosine_sim_matrix(t, g, n), 1.0 / 0.5);
    Var cl = ad::sub(t, ad::sum(t, ad::logsumexp_rows(t, s)), ad::sum(t, ad::diagonal(t, s)));
    Var bpr = ad::sum(t, ad::log_sigmoid(t, ad::row_dot(t, g, n)));
    return ad::add(t, ad::sub(t, cl, bpr), ad::scale(t, ad::sum_squares(t, v[0]), 1e-2));
  };
  std::mt19937_64 rng(21);
  std::vector<Tensor<double>> inputs = {random_tensor(Shape{4, 3}, rng), random_tensor(Shape{3, 3}, rng), random_tensor(Shape{3}, rng),
                                        random_tensor(Shape{6, 6}, rng), Tensor<double>::scalar(0.25), random_tensor(Shape{6, 6}, rng)};
  const auto res = grad_check(build, inputs);
  EXPECT_LT(res.max_rel_error, 1e-6);
  EXPECT_GT(res.checked, 80u);
}

}  // namespace
}  // namespace hgcl
