// Copyright 2026 The memsgd Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "memsgd/data.hpp"
#include "memsgd/synthetic.hpp"

namespace memsgd {
namespace {

TEST(ParseLibsvm, OneBasedIndicesBecomeZeroBased) {
  const Dataset ds = parse_libsvm("-1 3:4.5 7:1.0\n");
  ASSERT_EQ(ds.n(), 1u);
  EXPECT_EQ(ds.d, 7u);
  EXPECT_EQ(ds.labels[0], -1);
  const auto idx = ds.row_indices(0);
  const auto val = ds.row_values(0);
  ASSERT_EQ(idx.size(), 2u);
  EXPECT_EQ(idx[0], 2u);
  EXPECT_EQ(idx[1], 6u);
  EXPECT_EQ(val[0], 4.5);
  EXPECT_EQ(val[1], 1.0);
}

TEST(ParseLibsvm, DensityIsNonzerosOverCells) {
  const Dataset ds = parse_libsvm("+1 1:2\n-1 2:3\n");
  EXPECT_EQ(ds.n(), 2u);
  EXPECT_EQ(ds.d, 2u);
  EXPECT_DOUBLE_EQ(ds.density(), 0.5);
}

TEST(ParseLibsvm, SkipsBlankLinesAndComments) {
  const Dataset ds = parse_libsvm("\n# header\n+1 1:1 # trailing\n\n-1\n");
  EXPECT_EQ(ds.n(), 2u);
  EXPECT_EQ(ds.row_indices(1).size(), 0u);
}

TEST(ParseLibsvm, DimensionOverride) {
  LibsvmOptions opts;
  opts.dim = 10;
  EXPECT_EQ(parse_libsvm("+1 2:1\n", opts).d, 10u);
  opts.dim = 1;
  EXPECT_THROW(parse_libsvm("+1 2:1\n", opts), ParseError);
}

TEST(ParseLibsvm, MalformedLineReportsLineNumber) {
  try {
    parse_libsvm("+1 1:1\n-1 2:abc\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_libsvm("+1 1-1\n"), ParseError);
  EXPECT_THROW(parse_libsvm("+1 0:1\n"), ParseError);
  EXPECT_THROW(parse_libsvm("x 1:1\n"), ParseError);
}

TEST(ParseLibsvm, RejectsNonIncreasingIndices) {
  EXPECT_THROW(parse_libsvm("+1 3:1 2:1\n"), ParseError);
  EXPECT_THROW(parse_libsvm("+1 2:1 2:1\n"), ParseError);
}

TEST(ParseLibsvm, LabelModes) {
  EXPECT_THROW(parse_libsvm("0 1:1\n"), ParseError);
  EXPECT_THROW(parse_libsvm("2 1:1\n"), ParseError);
  LibsvmOptions opts;
  opts.labels = LabelMode::zero_one;
  const Dataset ds = parse_libsvm("0 1:1\n1 1:1\n", opts);
  EXPECT_EQ(ds.labels[0], -1);
  EXPECT_EQ(ds.labels[1], 1);
}

TEST(ReferenceDatasets, EpsilonStatistics) {
  const auto& table = reference_datasets();
  ASSERT_FALSE(table.empty());
  EXPECT_EQ(table[0].name, "epsilon");
  EXPECT_EQ(table[0].n, 400000u);
  EXPECT_EQ(table[0].d, 2000u);
  EXPECT_EQ(table[0].density, 1.0);
}

// Round trip on random sparse datasets: serialize, re-parse, compare.
TEST(ParseLibsvm, RoundTripProperty) {
  Rng rng = make_stream(42);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 50; ++trial) {
    Dataset ds;
    ds.d = 1 + uniform_index(rng, 30);
    const std::size_t n = 1 + uniform_index(rng, 20);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::size_t> idx;
      std::vector<double> val;
      for (std::size_t j = 0; j < ds.d; ++j) {
        if (uniform_unit(rng) < 0.3) {
          idx.push_back(j);
          val.push_back(gauss(rng) * std::pow(10.0, static_cast<double>(uniform_index(rng, 9)) - 4));
        }
      }
      ds.add_row(idx, val, uniform_unit(rng) < 0.5 ? 1 : -1);
    }
    LibsvmOptions opts;
    opts.dim = ds.d;
    EXPECT_EQ(parse_libsvm(to_libsvm(ds), opts), ds);
  }
}

TEST(SyntheticLogistic, DeterministicForFixedSeed) {
  const auto a = make_synthetic_logistic(10, 3, 1.0, 7);
  const auto b = make_synthetic_logistic(10, 3, 1.0, 7);
  EXPECT_EQ(to_libsvm(a.dataset()), to_libsvm(b.dataset()));
  EXPECT_EQ(*a.optimum, *b.optimum);
  const auto c = make_synthetic_logistic(10, 3, 1.0, 8);
  EXPECT_NE(to_libsvm(a.dataset()), to_libsvm(c.dataset()));
}

TEST(SyntheticLogistic, LambdaIsOneOverN) {
  const auto p = make_synthetic_logistic(40, 5, 0.5, 1);
  EXPECT_DOUBLE_EQ(p.lambda, 1.0 / 40.0);
  EXPECT_EQ(p.dataset().n(), 40u);
  for (std::size_t i = 0; i < p.dataset().n(); ++i) EXPECT_GE(p.dataset().row_indices(i).size(), 1u);
}

TEST(SyntheticLogistic, StoredOptimumIsStationaryAndMinimal) {
  const auto p = make_synthetic_logistic(200, 20, 0.3, 3);
  const auto& obj = std::get<LogisticObjective>(p.objective);
  // oracle: brute-force average of per-sample gradients
  const DenseVector g = average_gradient(obj, *p.optimum);
  EXPECT_LT(norm(g), 1e-8);
  EXPECT_LE(*p.optimum_value, obj.value(DenseVector(20, 0.0)));
}

TEST(Quadratic, OneDimensionalClosedForm) {
  const auto p = make_quadratic(1, 1.0, 1.0, 5);
  const auto& q = std::get<QuadraticObjective>(p.objective);
  ASSERT_EQ(q.num_samples(), 1u);
  const double c = q.center(0)[0];
  EXPECT_EQ((*p.optimum)[0], c);
  EXPECT_EQ(*p.optimum_value, 0.0);
  const double x = c + 3.0;
  EXPECT_DOUBLE_EQ(q.value(std::span<const double>(&x, 1)), 0.5 * 9.0);
}

TEST(Quadratic, HessianSpectrumWithinBounds) {
  const std::size_t d = 30;
  const double mu = 0.5, L = 7.0;
  const auto p = make_quadratic(d, mu, L, 11);
  const auto& q = std::get<QuadraticObjective>(p.objective);
  Eigen::MatrixXd h(d, d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c) h(r, c) = q.hessian()[r * d + c];
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
  EXPECT_GE(solver.eigenvalues().minCoeff(), mu - 1e-9);
  EXPECT_LE(solver.eigenvalues().maxCoeff(), L + 1e-9);
  EXPECT_NEAR(solver.eigenvalues().minCoeff(), mu, 1e-9);
  EXPECT_NEAR(solver.eigenvalues().maxCoeff(), L, 1e-9);
}

TEST(Quadratic, GradientVanishesAtOptimum) {
  const auto p = make_quadratic(12, 1.0, 10.0, 2);
  const auto& q = std::get<QuadraticObjective>(p.objective);
  const DenseVector g = average_gradient(q, *p.optimum);
  EXPECT_LT(norm(g), 1e-12);
  // f* equals the direct finite-sum mean
  double direct = 0.0;
  for (std::size_t i = 0; i < q.num_samples(); ++i) direct += q.sample_value(*p.optimum, i);
  EXPECT_NEAR(direct / static_cast<double>(q.num_samples()), *p.optimum_value, 1e-12);
}

TEST(Quadratic, RejectsBadModuli) {
  EXPECT_THROW(make_quadratic(3, 0.0, 1.0, 1), std::invalid_argument);
  EXPECT_THROW(make_quadratic(3, 2.0, 1.0, 1), std::invalid_argument);
}

}  // namespace
}  // namespace memsgd
