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

#include "memsgd/objective.hpp"
#include "memsgd/synthetic.hpp"
#include "test_support.hpp"

namespace memsgd {
namespace {

TEST(Logistic, ValueAtZeroIsLogTwo) {
  const auto p = make_synthetic_logistic(50, 8, 0.5, 1);
  const auto& obj = std::get<LogisticObjective>(p.objective);
  EXPECT_NEAR(full_value(obj, DenseVector(8, 0.0)), std::log(2.0), 1e-15);
}

TEST(Logistic, RegularizerOnly) {
  auto data = std::make_shared<Dataset>();
  data->d = 2;
  const LogisticObjective obj(data, 1.0);
  const DenseVector x{1.0, 1.0};
  EXPECT_DOUBLE_EQ(full_value(obj, x), 1.0);
}

TEST(Logistic, DimensionMismatch) {
  const auto p = make_synthetic_logistic(5, 4, 1.0, 1);
  const auto& obj = std::get<LogisticObjective>(p.objective);
  EXPECT_THROW(full_value(obj, DenseVector(3, 0.0)), DimensionMismatch);
  EXPECT_THROW(stochastic_grad(obj, DenseVector(4, 0.0), std::size_t{5}), std::out_of_range);
}

TEST(Logistic, StableForHugeMargins) {
  auto data = std::make_shared<Dataset>();
  data->d = 1;
  const std::vector<std::size_t> idx{0};
  const std::vector<double> v{1.0};
  data->add_row(idx, v, 1);
  const LogisticObjective obj(data, 0.0);
  for (double x : {-800.0, -40.0, 40.0, 800.0}) {
    const DenseVector pt{x};
    const double f = obj.value(pt);
    EXPECT_TRUE(std::isfinite(f));
    const auto g = stochastic_grad(obj, pt, std::size_t{0});
    EXPECT_TRUE(std::isfinite(g.gradient[0]));
    if (x < 0) {
      EXPECT_NEAR(f, -x, 1e-12);
    }
  }
}

TEST(Logistic, GradientAtZeroUnitRow) {
  auto data = std::make_shared<Dataset>();
  data->d = 2;
  const std::vector<std::size_t> idx{0};
  const std::vector<double> v{1.0};
  data->add_row(idx, v, 1);
  const LogisticObjective obj(data, 0.0);
  const auto g = stochastic_grad(obj, DenseVector(2, 0.0), std::size_t{0});
  EXPECT_EQ(g.gradient, (DenseVector{-0.5, 0.0}));
}

template <class O>
void expect_average_of_samples_is_full_gradient(const O& obj, Rng& rng) {
  for (int trial = 0; trial < 5; ++trial) {
    const DenseVector x = testing_support::gaussian(rng, obj.dim());
    DenseVector full(obj.dim());
    obj.full_gradient(x, full);
    const DenseVector avg = average_gradient(obj, x);
    for (std::size_t j = 0; j < obj.dim(); ++j) EXPECT_NEAR(avg[j], full[j], 1e-12);
  }
}

TEST(Objectives, SampleGradientsAverageToFullGradient) {
  Rng rng = make_stream(3);
  const auto lp = make_synthetic_logistic(120, 15, 0.4, 2, false);
  expect_average_of_samples_is_full_gradient(std::get<LogisticObjective>(lp.objective), rng);
  const auto qp = make_quadratic(10, 1.0, 10.0, 4);
  expect_average_of_samples_is_full_gradient(std::get<QuadraticObjective>(qp.objective), rng);
}

TEST(Objectives, FiniteDifferenceGradientCheck) {
  Rng rng = make_stream(5);
  const auto lp = make_synthetic_logistic(60, 12, 0.5, 3, false);
  const auto qp = make_quadratic(12, 1.0, 10.0, 3);
  const auto& logistic = std::get<LogisticObjective>(lp.objective);
  const auto& quadratic = std::get<QuadraticObjective>(qp.objective);
  for (int trial = 0; trial < 20; ++trial) {
    EXPECT_LT(testing_support::finite_difference_error(logistic, rng), 1e-5);
    EXPECT_LT(testing_support::finite_difference_error(quadratic, rng), 1e-5);
  }
}

TEST(Logistic, StrongConvexityInequality) {
  Rng rng = make_stream(6);
  const auto lp = make_synthetic_logistic(80, 10, 0.6, 4, false);
  const auto& obj = std::get<LogisticObjective>(lp.objective);
  DenseVector gx(10);
  for (int trial = 0; trial < 100; ++trial) {
    const DenseVector x = testing_support::gaussian(rng, 10);
    const DenseVector y = testing_support::gaussian(rng, 10);
    obj.full_gradient(x, gx);
    double lin = obj.value(x);
    for (std::size_t j = 0; j < 10; ++j) lin += gx[j] * (y[j] - x[j]);
    lin += 0.5 * obj.lambda() * squared_distance(x, y);
    EXPECT_GE(obj.value(y), lin - 1e-9);
  }
}

TEST(Logistic, PerSampleSmoothness) {
  Rng rng = make_stream(7);
  const auto lp = make_synthetic_logistic(40, 10, 0.6, 5, false);
  const auto& obj = std::get<LogisticObjective>(lp.objective);
  const double L = obj.smoothness();
  for (int trial = 0; trial < 100; ++trial) {
    const DenseVector x = testing_support::gaussian(rng, 10);
    const DenseVector y = testing_support::gaussian(rng, 10);
    const std::size_t i = uniform_index(rng, obj.num_samples());
    const auto gx = stochastic_grad(obj, x, i);
    const auto gy = stochastic_grad(obj, y, i);
    EXPECT_LE(std::sqrt(squared_distance(gx.gradient, gy.gradient)),
              L * std::sqrt(squared_distance(x, y)) + 1e-12);
  }
}

TEST(Objectives, OptimumBeatsRandomPoints) {
  Rng rng = make_stream(8);
  const auto lp = make_synthetic_logistic(100, 10, 1.0, 6);
  const auto& obj = std::get<LogisticObjective>(lp.objective);
  for (int trial = 0; trial < 100; ++trial) {
    DenseVector x = *lp.optimum;
    for (double& v : x) v += 0.1 * std::normal_distribution<double>()(rng);
    EXPECT_LE(*lp.optimum_value, full_value(obj, x));
  }
}

TEST(GradNormBound, UnitRowsAtZero) {
  auto data = std::make_shared<Dataset>();
  data->d = 3;
  Rng rng = make_stream(9);
  for (int i = 0; i < 10; ++i) {
    DenseVector row = testing_support::gaussian(rng, 3);
    const double nr = norm(row);
    for (double& v : row) v /= nr;
    const std::vector<std::size_t> idx{0, 1, 2};
    data->add_row(idx, row, i % 2 ? 1 : -1);
  }
  const LogisticObjective obj(data, 0.0);
  EXPECT_NEAR(grad_norm_bound_estimate(obj, {DenseVector(3, 0.0)}), 0.25, 1e-15);
}

TEST(GradNormBound, MaxOverPointsMatchesBruteForce) {
  Rng rng = make_stream(10);
  const auto lp = make_synthetic_logistic(30, 6, 1.0, 7, false);
  const auto& obj = std::get<LogisticObjective>(lp.objective);
  std::vector<DenseVector> points;
  double running = 0.0;
  for (int p = 0; p < 8; ++p) {
    points.push_back(testing_support::gaussian(rng, 6));
    // brute-force double loop
    double best = 0.0;
    for (const auto& x : points) {
      double s = 0.0;
      for (std::size_t i = 0; i < obj.num_samples(); ++i)
        s += squared_norm(stochastic_grad(obj, x, i).gradient);
      best = std::max(best, s / static_cast<double>(obj.num_samples()));
    }
    const double est = grad_norm_bound_estimate(obj, points);
    EXPECT_DOUBLE_EQ(est, best);
    EXPECT_GE(est, running);
    running = est;
  }
  EXPECT_THROW(grad_norm_bound_estimate(obj, {}), std::invalid_argument);
}

}  // namespace
}  // namespace memsgd
