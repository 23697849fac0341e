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

#include <algorithm>
#include <map>
#include <numeric>

#include "memsgd/compression.hpp"

namespace memsgd {
namespace {

DenseVector random_vector(Rng& rng, std::size_t d) {
  std::normal_distribution<double> gauss;
  DenseVector x(d);
  for (double& v : x) v = gauss(rng);
  return x;
}

// Oracle: full stable sort by (|x| desc, index asc), first k.
std::vector<std::size_t> top_k_by_sorting(const DenseVector& x, std::size_t k) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(x[a]) > std::abs(x[b]); });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

// Oracle: mean over all k-subsets of the dropped mass, by bitmask enumeration.
double rand_k_error_by_bitmask(const DenseVector& x, std::size_t k) {
  const std::size_t d = x.size();
  double total = 0.0;
  std::size_t count = 0;
  for (std::uint32_t mask = 0; mask < (1u << d); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != k) continue;
    for (std::size_t i = 0; i < d; ++i)
      if (!(mask & (1u << i))) total += x[i] * x[i];
    ++count;
  }
  return total / static_cast<double>(count);
}

TEST(TopK, KeepsLargestMagnitudes) {
  const DenseVector x{1, -3, 2, -2};
  const SparseUpdate u = top_k(x, 2);
  EXPECT_EQ(u.indices, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(u.values, (std::vector<double>{-3, 2}));
}

TEST(TopK, TiesGoToLowerIndex) {
  const DenseVector x{2, -2, 1};
  const SparseUpdate u = top_k(x, 1);
  EXPECT_EQ(u.indices, (std::vector<std::size_t>{0}));
  EXPECT_EQ(u.values, (std::vector<double>{2}));
  EXPECT_EQ(top_k(x, 1, TieBreak::highest_index).indices, (std::vector<std::size_t>{1}));
  const DenseVector flat{1, 1, 1, 1, 1};
  EXPECT_EQ(top_k(flat, 3).indices, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(TopK, FullKIsIdentity) {
  Rng rng = make_stream(1);
  const DenseVector x = random_vector(rng, 9);
  const SparseUpdate u = top_k(x, 9);
  EXPECT_EQ(u.to_dense(), x);
  EXPECT_EQ(residual_squared_norm(x, u), 0.0);
}

TEST(TopK, RejectsBadK) {
  const DenseVector x{1, 2};
  EXPECT_THROW(top_k(x, 0), std::invalid_argument);
  EXPECT_THROW(top_k(x, 3), std::invalid_argument);
}

TEST(TopK, MatchesSortingOracle) {
  Rng rng = make_stream(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + uniform_index(rng, 60);
    DenseVector x = random_vector(rng, d);
    // inject ties
    for (std::size_t j = 0; j < d / 3; ++j) x[uniform_index(rng, d)] = (j % 2 ? -1.0 : 1.0);
    const std::size_t k = 1 + uniform_index(rng, d);
    EXPECT_EQ(top_k(x, k).indices, top_k_by_sorting(x, k));
  }
}

TEST(TopK, PermutationEquivariant) {
  Rng rng = make_stream(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 2 + uniform_index(rng, 20);
    const DenseVector x = random_vector(rng, d);  // continuous: no ties
    std::vector<std::size_t> perm(d);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    DenseVector y(d);
    for (std::size_t j = 0; j < d; ++j) y[perm[j]] = x[j];
    const std::size_t k = 1 + uniform_index(rng, d);
    std::vector<std::size_t> mapped;
    for (std::size_t j : top_k(x, k).indices) mapped.push_back(perm[j]);
    std::sort(mapped.begin(), mapped.end());
    EXPECT_EQ(top_k(y, k).indices, mapped);
  }
}

TEST(RandK, FullKIsIdentity) {
  Rng rng = make_stream(4);
  const DenseVector x = random_vector(rng, 6);
  EXPECT_EQ(rand_k(x, 6, rng).to_dense(), x);
}

TEST(RandK, AlwaysExactlyKSortedDistinct) {
  Rng rng = make_stream(5);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t d = 1 + uniform_index(rng, 30);
    const std::size_t k = 1 + uniform_index(rng, d);
    const DenseVector x = random_vector(rng, d);
    const SparseUpdate u = rand_k(x, k, rng);
    ASSERT_EQ(u.nnz(), k);
    for (std::size_t j = 0; j < k; ++j) {
      EXPECT_EQ(u.values[j], x[u.indices[j]]);
      if (j) {
        EXPECT_LT(u.indices[j - 1], u.indices[j]);
      }
    }
  }
}

TEST(RandK, SubsetsAreUniform) {
  // chi-square over the C(5,2) = 10 subsets
  Rng rng = make_stream(6);
  std::map<std::vector<std::size_t>, int> counts;
  const int draws = 50000;
  for (int t = 0; t < draws; ++t) ++counts[random_subset(5, 2, rng)];
  ASSERT_EQ(counts.size(), 10u);
  const double expected = draws / 10.0;
  double chi2 = 0.0;
  for (const auto& [s, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 27.88);  // 99.9% quantile, 9 dof
}

TEST(RandK, TwoDimensionalSymmetry) {
  const DenseVector x{3.0, -4.0};
  Rng rng = make_stream(7);
  const double exact =
      contraction_estimate(CompressorSpec::random(1), x, 1, rng, EstimateMode::exact);
  EXPECT_DOUBLE_EQ(exact * 25.0, (9.0 + 16.0) / 2.0);
}

TEST(RandK, FourChooseTwoEnumeration) {
  const DenseVector x{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(rand_k_error_by_bitmask(x, 2), 15.0);
  Rng rng = make_stream(8);
  EXPECT_DOUBLE_EQ(
      contraction_estimate(CompressorSpec::random(2), x, 1, rng, EstimateMode::exact) * 30.0, 15.0);
}

TEST(RandP, FullProbabilityOneDimension) {
  Rng rng = make_stream(9);
  const DenseVector x{2.5};
  for (int t = 0; t < 10; ++t) {
    const SparseUpdate u = rand_p(x, 1.0, rng);
    ASSERT_EQ(u.nnz(), 1u);
    EXPECT_EQ(residual_squared_norm(x, u), 0.0);
  }
}

TEST(RandP, GateTimesCoordinateEnumeration) {
  const DenseVector x{1, 1};
  // oracle by hand: closed gate keeps error 2, open gate keeps error 1
  const double oracle = 0.5 * 2.0 + 0.5 * 1.0;
  EXPECT_DOUBLE_EQ(oracle, (1.0 - 0.25) * 2.0);
  Rng rng = make_stream(10);
  EXPECT_DOUBLE_EQ(
      contraction_estimate(CompressorSpec::random_p(0.5), x, 1, rng, EstimateMode::exact) * 2.0,
      oracle);
}

TEST(RandP, EmptyUpdateKeepsDimension) {
  Rng rng = make_stream(11);
  const DenseVector x{1, 2, 3};
  bool saw_empty = false;
  for (int t = 0; t < 200 && !saw_empty; ++t) {
    const SparseUpdate u = rand_p(x, 0.1, rng);
    EXPECT_LE(u.nnz(), 1u);
    EXPECT_EQ(u.dim, 3u);
    saw_empty = u.empty();
  }
  EXPECT_TRUE(saw_empty);
  EXPECT_THROW(rand_p(x, 0.0, rng), std::invalid_argument);
  EXPECT_THROW(rand_p(x, 1.5, rng), std::invalid_argument);
}

TEST(RandP, EmissionRateMatchesP) {
  Rng rng = make_stream(12);
  const DenseVector x{1, 2, 3, 4};
  const int draws = 100000;
  int emitted = 0;
  for (int t = 0; t < draws; ++t) emitted += static_cast<int>(rand_p(x, 0.3, rng).nnz());
  const double se = std::sqrt(0.3 * 0.7 / draws);
  EXPECT_NEAR(emitted / static_cast<double>(draws), 0.3, 4 * se);
}

TEST(Qsgd, SingleNonzeroIsExact) {
  Rng rng = make_stream(13);
  const DenseVector x{0.0, -3.7, 0.0};
  for (int s : {1, 2, 16, 256}) {
    const SparseUpdate u = qsgd(x, s, rng);
    EXPECT_EQ(u.to_dense(), x);
  }
}

TEST(Qsgd, ZeroVectorGivesEmptyUpdate) {
  Rng rng = make_stream(14);
  const DenseVector x(5, 0.0);
  const SparseUpdate u = qsgd(x, 4, rng);
  EXPECT_TRUE(u.empty());
  EXPECT_EQ(u.dim, 5u);
  EXPECT_THROW(qsgd(x, 0, rng), std::invalid_argument);
}

TEST(Qsgd, UnbiasedMonteCarlo) {
  Rng rng = make_stream(15);
  const DenseVector x{0.6, 0.8};
  const int s = 4;
  const int trials = 100000;
  DenseVector sum(2, 0.0);
  for (int t = 0; t < trials; ++t) {
    const DenseVector q = qsgd(x, s, rng).to_dense();
    sum[0] += q[0];
    sum[1] += q[1];
  }
  for (std::size_t j = 0; j < 2; ++j) {
    // per-draw variance of a two-point rounding: (1/s)^2 frac (1 - frac), ||x|| = 1
    const double r = s * x[j];
    const double frac = r - std::floor(r);
    const double se = std::sqrt(frac * (1 - frac) / (s * s) / trials);
    EXPECT_NEAR(sum[j] / trials, x[j], 3 * se) << "coordinate " << j;
  }
}

TEST(Qsgd, OutputsAreOnTheLevelGrid) {
  Rng rng = make_stream(16);
  const DenseVector x = random_vector(rng, 50);
  const double nrm = norm(x);
  const SparseUpdate u = qsgd(x, 8, rng);
  for (std::size_t j = 0; j < u.nnz(); ++j) {
    const double level = std::abs(u.values[j]) / nrm * 8.0;
    EXPECT_NEAR(level, std::round(level), 1e-9);
    EXPECT_EQ(std::signbit(u.values[j]), std::signbit(x[u.indices[j]]));
  }
}

TEST(Contraction, TopKFullIsZero) {
  Rng rng = make_stream(17);
  const DenseVector x = random_vector(rng, 7);
  EXPECT_EQ(contraction_estimate(CompressorSpec::top(7), x, 1, rng), 0.0);
}

TEST(Contraction, ZeroVectorConvention) {
  Rng rng = make_stream(18);
  const DenseVector x(4, 0.0);
  EXPECT_EQ(contraction_estimate(CompressorSpec::random(2), x, 10, rng), 0.0);
  EXPECT_THROW(contraction_estimate(CompressorSpec::random(2), x, 0, rng), std::invalid_argument);
}

// Property: every sparsifier is a k-contraction; top_k never loses to rand_k.
TEST(Contraction, EnumerationMatchesClosedFormAndBoundsTopK) {
  Rng rng = make_stream(19);
  for (std::size_t d = 2; d <= 8; ++d) {
    for (std::size_t k = 1; k <= d; ++k) {
      for (int trial = 0; trial < 10; ++trial) {
        const DenseVector x = random_vector(rng, d);
        const double nx = squared_norm(x);
        const double exact =
            contraction_estimate(CompressorSpec::random(k), x, 1, rng, EstimateMode::exact);
        const double expected = 1.0 - static_cast<double>(k) / static_cast<double>(d);
        EXPECT_NEAR(exact, expected, 1e-12);
        EXPECT_NEAR(exact * nx, rand_k_error_by_bitmask(x, k), 1e-12 * nx);
        EXPECT_LE(contraction_estimate(CompressorSpec::top(k), x, 1, rng), exact + 1e-15);
      }
    }
  }
}

TEST(Contraction, MonteCarloWithinBoundForAllKinds) {
  Rng rng = make_stream(20);
  const std::size_t d = 12;
  const std::size_t trials = 20000;
  const DenseVector x = random_vector(rng, d);
  for (const CompressorSpec& spec :
       {CompressorSpec::identity(), CompressorSpec::top(3), CompressorSpec::random(3),
        CompressorSpec::random_p(0.4)}) {
    const double k_eff = *contraction_parameter(spec, d);
    const double bound = 1.0 - k_eff / static_cast<double>(d);
    // crude 3 sigma slack: the per-draw ratio lies in [0, 1]
    const double slack = 3.0 * 0.5 / std::sqrt(static_cast<double>(trials));
    EXPECT_LE(contraction_estimate(spec, x, trials, rng), bound + slack) << to_string(spec.kind);
  }
  EXPECT_FALSE(contraction_parameter(CompressorSpec::quantized(4), d).has_value());
}

TEST(Compress, ResidualReconstructsBitwise) {
  Rng rng = make_stream(21);
  const DenseVector x = random_vector(rng, 25);
  for (const CompressorSpec& spec : {CompressorSpec::top(5), CompressorSpec::random(7),
                                     CompressorSpec::random_p(1.0), CompressorSpec::identity()}) {
    const SparseUpdate u = compress(spec, x, rng);
    DenseVector residual = x;
    u.subtract_from(residual);
    DenseVector back = u.to_dense();
    for (std::size_t j = 0; j < x.size(); ++j) back[j] += residual[j];
    EXPECT_EQ(back, x) << to_string(spec.kind);
  }
}

TEST(CompressorSpec, Validation) {
  EXPECT_THROW(CompressorSpec::top(0).validate(5), std::invalid_argument);
  EXPECT_THROW(CompressorSpec::random(6).validate(5), std::invalid_argument);
  EXPECT_THROW(CompressorSpec::random_p(0.0).validate(5), std::invalid_argument);
  EXPECT_THROW(CompressorSpec::quantized(0).validate(5), std::invalid_argument);
  EXPECT_NO_THROW(CompressorSpec::top(5).validate(5));
  EXPECT_EQ(compressor_kind_from_string("rand_p"), CompressorKind::rand_p);
  EXPECT_THROW(compressor_kind_from_string("bogus"), std::invalid_argument);
}

}  // namespace
}  // namespace memsgd
