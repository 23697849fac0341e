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

#include <cmath>
#include <memory>
#include <optional>
#include <random>

#include "memsgd/data.hpp"
#include "memsgd/objective.hpp"

namespace memsgd {

/// A generated problem with its known minimizer.
///
/// `lambda` is the strong-convexity modulus the stepsize schedules plug in
/// for mu: the L2 weight 1/n for logistic problems, mu for quadratics.
struct SyntheticProblem {
  AnyObjective objective;
  double lambda = 0.0;
  std::optional<DenseVector> optimum;
  std::optional<double> optimum_value;

  std::size_t dim() const {
    return std::visit([](const auto& o) { return o.dim(); }, objective);
  }
  std::size_t num_samples() const {
    return std::visit([](const auto& o) { return o.num_samples(); }, objective);
  }
  /// Only for logistic problems.
  const Dataset& dataset() const { return std::get<LogisticObjective>(objective).dataset(); }
};

struct NewtonReport {
  std::size_t iterations = 0;
  double gradient_norm = 0.0;
};

/// Newton-CG with backtracking on a logistic objective, run until the full
/// gradient norm drops below tol. Deterministic.
inline NewtonReport minimize_logistic(const LogisticObjective& obj, DenseVector& x,
                                      double tol = 1e-10, std::size_t max_iter = 200) {
  const std::size_t d = obj.dim();
  DenseVector g(d), p(d), r(d), dir(d), hd(d), trial(d), trial_g(d);
  NewtonReport report;
  obj.full_gradient(x, g);
  double gnorm = norm(g);
  double fx = obj.value(x);
  while (gnorm >= tol && report.iterations < max_iter) {
    ++report.iterations;
    // CG on H p = -g
    const double cg_tol = std::min(0.5, std::sqrt(gnorm)) * gnorm;
    std::fill(p.begin(), p.end(), 0.0);
    for (std::size_t j = 0; j < d; ++j) r[j] = -g[j];
    dir = r;
    double rr = squared_norm(r);
    for (std::size_t it = 0; it < 10 * d + 10 && std::sqrt(rr) > cg_tol; ++it) {
      obj.hessian_vector(x, dir, hd);
      const double alpha = rr / dot(dir, hd);
      for (std::size_t j = 0; j < d; ++j) {
        p[j] += alpha * dir[j];
        r[j] -= alpha * hd[j];
      }
      const double rr_next = squared_norm(r);
      const double beta = rr_next / rr;
      rr = rr_next;
      for (std::size_t j = 0; j < d; ++j) dir[j] = r[j] + beta * dir[j];
    }
    const double slope = dot(g, p);
    double step = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      for (std::size_t j = 0; j < d; ++j) trial[j] = x[j] + step * p[j];
      const double ft = obj.value(trial);
      if (ft <= fx + 1e-4 * step * slope) {
        fx = ft;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // objective differences are below rounding; fall back to the full step
      // when it still shrinks the gradient.
      for (std::size_t j = 0; j < d; ++j) trial[j] = x[j] + p[j];
      obj.full_gradient(trial, trial_g);
      if (norm(trial_g) >= gnorm) break;
      fx = obj.value(trial);
    }
    x.swap(trial);
    obj.full_gradient(x, g);
    gnorm = norm(g);
  }
  report.gradient_norm = gnorm;
  return report;
}

/// Random logistic-regression problem with lambda = 1/n. Rows have expected
/// squared norm about 1; labels come from a noisy linear teacher. The
/// optimum is solved to a gradient norm below 1e-10 unless solve_optimum is
/// false (large dense instances).
inline SyntheticProblem make_synthetic_logistic(std::size_t n, std::size_t d, double density,
                                                std::uint64_t seed, bool solve_optimum = true) {
  if (n < 1 || d < 1) throw std::invalid_argument("make_synthetic_logistic: n, d must be >= 1");
  if (!(density > 0.0 && density <= 1.0))
    throw std::invalid_argument("make_synthetic_logistic: density must lie in (0, 1]");
  Rng rng = make_stream(seed, 0x5eed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  DenseVector teacher(d);
  for (double& w : teacher) w = gauss(rng);

  auto data = std::make_shared<Dataset>();
  data->d = d;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d) * density);
  std::vector<std::size_t> idx;
  std::vector<double> vals;
  for (std::size_t i = 0; i < n; ++i) {
    idx.clear();
    vals.clear();
    for (std::size_t j = 0; j < d; ++j) {
      if (density < 1.0 && uniform_unit(rng) >= density) continue;
      idx.push_back(j);
      vals.push_back(gauss(rng) * scale);
    }
    if (idx.empty()) {
      idx.push_back(uniform_index(rng, d));
      vals.push_back(gauss(rng) * scale);
    }
    double margin = 0.0;
    for (std::size_t j = 0; j < idx.size(); ++j) margin += vals[j] * teacher[idx[j]];
    const int label = uniform_unit(rng) < detail::sigmoid(3.0 * margin) ? 1 : -1;
    data->add_row(idx, vals, label);
  }

  const double lambda = 1.0 / static_cast<double>(n);
  LogisticObjective obj(std::move(data), lambda);
  SyntheticProblem problem{obj, lambda, std::nullopt, std::nullopt};
  if (solve_optimum) {
    DenseVector x(d, 0.0);
    minimize_logistic(obj, x);
    problem.optimum_value = obj.value(x);
    problem.optimum = std::move(x);
  }
  return problem;
}

struct QuadraticOptions {
  std::size_t n = 0;          // number of centers; 0 means d
  double center_scale = 1.0;  // spread of the minimizer
  double noise = 1.0;         // spread of the centers around it
};

/// Finite-sum least squares f_i(x) = 1/2 (x - c_i)^T H (x - c_i) with
/// H = Q^T diag(h) Q, Q a random rotation and h evenly spaced on [mu, L].
/// The minimizer is the center mean; both it and f* are stored.
inline SyntheticProblem make_quadratic(std::size_t d, double mu, double L, std::uint64_t seed,
                                       QuadraticOptions opts = {}) {
  if (d < 1) throw std::invalid_argument("make_quadratic: d must be >= 1");
  if (!(mu > 0.0 && mu <= L)) throw std::invalid_argument("make_quadratic: need 0 < mu <= L");
  Rng rng = make_stream(seed, 0x9a7d);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // rows of q: orthonormal basis by modified Gram-Schmidt
  std::vector<double> q(d * d);
  for (double& v : q) v = gauss(rng);
  for (std::size_t r = 0; r < d; ++r) {
    double* row = q.data() + r * d;
    for (std::size_t prev = 0; prev < r; ++prev) {
      const double* p = q.data() + prev * d;
      double proj = 0.0;
      for (std::size_t j = 0; j < d; ++j) proj += row[j] * p[j];
      for (std::size_t j = 0; j < d; ++j) row[j] -= proj * p[j];
    }
    const double nrm = norm(std::span<const double>(row, d));
    for (std::size_t j = 0; j < d; ++j) row[j] /= nrm;
  }
  DenseVector spectrum(d);
  for (std::size_t j = 0; j < d; ++j)
    spectrum[j] = d == 1 ? mu : mu + (L - mu) * static_cast<double>(j) / static_cast<double>(d - 1);

  std::vector<double> hessian(d * d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = r; c < d; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += q[j * d + r] * spectrum[j] * q[j * d + c];
      hessian[r * d + c] = s;
      hessian[c * d + r] = s;
    }
  }

  const std::size_t n = opts.n == 0 ? d : opts.n;
  DenseVector target(d);
  for (double& v : target) v = opts.center_scale * gauss(rng);
  std::vector<double> centers(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centers[i * d + j] = target[j] + opts.noise * gauss(rng);

  QuadraticObjective obj(d, std::move(hessian), std::move(centers), mu, L);
  DenseVector optimum = obj.minimizer();
  const double optimum_value = obj.min_value();
  return SyntheticProblem{std::move(obj), mu, std::move(optimum), optimum_value};
}

}  // namespace memsgd
