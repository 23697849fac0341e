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

#pragma once

// Oracles shared by the unit and acceptance suites. Nothing here calls into
// the code paths it is used to check.

#include <cmath>
#include <random>

#include "memsgd/core.hpp"

namespace memsgd::testing_support {

inline DenseVector gaussian(Rng& rng, std::size_t d, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  DenseVector x(d);
  for (double& v : x) v = g(rng);
  return x;
}

/// Relative error between sample_gradient and central differences of
/// sample_value (step 1e-6) at a random point and sample.
template <class O>
double finite_difference_error(const O& obj, Rng& rng, double h = 1e-6) {
  const std::size_t d = obj.dim();
  DenseVector x = gaussian(rng, d);
  const std::size_t i = uniform_index(rng, obj.num_samples());
  DenseVector analytic(d), numeric(d);
  obj.sample_gradient(x, i, analytic);
  for (std::size_t j = 0; j < d; ++j) {
    const double keep = x[j];
    x[j] = keep + h;
    const double up = obj.sample_value(x, i);
    x[j] = keep - h;
    const double down = obj.sample_value(x, i);
    x[j] = keep;
    numeric[j] = (up - down) / (2.0 * h);
  }
  const double scale = std::max({norm(analytic), norm(numeric), 1e-8});
  return std::sqrt(squared_distance(analytic, numeric)) / scale;
}

/// S_T by direct summation of (a + t)^2 in integers.
inline std::uint64_t weight_sum_by_summation(std::uint64_t T, std::uint64_t a) {
  std::uint64_t s = 0;
  for (std::uint64_t t = 0; t < T; ++t) s += (a + t) * (a + t);
  return s;
}

/// Plain SGD x_{t+1} = x_t - eta_t grad f_{i_t}(x_t) drawing indices the way
/// the optimizer does (stream 0 of the seed).
template <class O, class Schedule>
DenseVector vanilla_sgd(const O& obj, const Schedule& schedule, std::uint64_t T,
                        std::uint64_t seed) {
  Rng rng = make_stream(seed, 0);
  DenseVector x(obj.dim(), 0.0), g(obj.dim());
  for (std::uint64_t t = 0; t < T; ++t) {
    const std::size_t i = uniform_index(rng, obj.num_samples());
    obj.sample_gradient(x, i, g);
    const double eta = schedule(t);
    for (std::size_t j = 0; j < x.size(); ++j) x[j] -= eta * g[j];
  }
  return x;
}

}  // namespace memsgd::testing_support
