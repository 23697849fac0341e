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

#include <algorithm>
#include <cmath>
#include <concepts>
#include <memory>
#include <variant>

#include "memsgd/core.hpp"
#include "memsgd/data.hpp"

namespace memsgd {

/// f(x) = (1/n) sum_i f_i(x), with per-sample gradients.
template <class O>
concept FiniteSumObjective = requires(const O& o, std::span<const double> x, std::size_t i,
                                      std::span<double> out) {
  { o.num_samples() } -> std::convertible_to<std::size_t>;
  { o.dim() } -> std::convertible_to<std::size_t>;
  { o.value(x) } -> std::convertible_to<double>;
  o.sample_gradient(x, i, out);
};

struct GradientSample {
  std::size_t index = 0;
  DenseVector gradient;
};

namespace detail {

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

/// 1 / (1 + exp(-z)) without overflow.
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

/// (1/n) sum log(1 + exp(-b_i a_i^T x)) + (lambda/2) ||x||^2
class LogisticObjective {
 public:
  LogisticObjective(std::shared_ptr<const Dataset> data, double lambda)
      : data_(std::move(data)), lambda_(lambda) {
    if (!data_) throw std::invalid_argument("LogisticObjective: null dataset");
    if (lambda_ < 0.0) throw std::invalid_argument("LogisticObjective: lambda must be >= 0");
  }

  std::size_t num_samples() const { return data_->n(); }
  std::size_t dim() const { return data_->d; }
  double lambda() const { return lambda_; }
  const Dataset& dataset() const { return *data_; }
  const std::shared_ptr<const Dataset>& dataset_ptr() const { return data_; }

  double sample_loss(std::span<const double> x, std::size_t i) const {
    return detail::softplus(-data_->labels[i] * data_->row_dot(i, x));
  }

  double value(std::span<const double> x) const {
    require_dim(dim(), x.size());
    double loss = 0.0;
    const std::size_t n = num_samples();
    for (std::size_t i = 0; i < n; ++i) loss += sample_loss(x, i);
    const double data_term = n == 0 ? 0.0 : loss / static_cast<double>(n);
    return data_term + 0.5 * lambda_ * squared_norm(x);
  }

  /// f_i(x), including the regularizer.
  double sample_value(std::span<const double> x, std::size_t i) const {
    return sample_loss(x, i) + 0.5 * lambda_ * squared_norm(x);
  }

  /// -b_i sigma(-b_i a_i^T x) a_i + lambda x. Dense because of lambda x.
  void sample_gradient(std::span<const double> x, std::size_t i, std::span<double> out) const {
    if (i >= num_samples()) throw std::out_of_range("sample index out of range");
    require_dim(dim(), x.size());
    require_dim(dim(), out.size());
    const double b = data_->labels[i];
    const double coef = -b * detail::sigmoid(-b * data_->row_dot(i, x));
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = lambda_ * x[j];
    const auto idx = data_->row_indices(i);
    const auto v = data_->row_values(i);
    for (std::size_t j = 0; j < idx.size(); ++j) out[idx[j]] += coef * v[j];
  }

  void full_gradient(std::span<const double> x, std::span<double> out) const {
    require_dim(dim(), out.size());
    std::fill(out.begin(), out.end(), 0.0);
    const std::size_t n = num_samples();
    for (std::size_t i = 0; i < n; ++i) {
      const double b = data_->labels[i];
      const double coef = -b * detail::sigmoid(-b * data_->row_dot(i, x)) / static_cast<double>(n);
      const auto idx = data_->row_indices(i);
      const auto v = data_->row_values(i);
      for (std::size_t j = 0; j < idx.size(); ++j) out[idx[j]] += coef * v[j];
    }
    for (std::size_t j = 0; j < x.size(); ++j) out[j] += lambda_ * x[j];
  }

  /// Hessian-vector product of the full objective.
  void hessian_vector(std::span<const double> x, std::span<const double> v,
                      std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const std::size_t n = num_samples();
    for (std::size_t i = 0; i < n; ++i) {
      const double s = detail::sigmoid(data_->row_dot(i, x));
      const double w = s * (1.0 - s) * data_->row_dot(i, v) / static_cast<double>(n);
      const auto idx = data_->row_indices(i);
      const auto vals = data_->row_values(i);
      for (std::size_t j = 0; j < idx.size(); ++j) out[idx[j]] += w * vals[j];
    }
    for (std::size_t j = 0; j < v.size(); ++j) out[j] += lambda_ * v[j];
  }

  /// max_i ||a_i||^2 / 4 + lambda: smoothness constant of every f_i.
  double smoothness() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < num_samples(); ++i) worst = std::max(worst, data_->row_squared_norm(i));
    return worst / 4.0 + lambda_;
  }

  double strong_convexity() const { return lambda_; }

 private:
  std::shared_ptr<const Dataset> data_;
  double lambda_;
};

/// f_i(x) = 1/2 (x - c_i)^T H (x - c_i) with a shared symmetric H whose
/// spectrum lies in [mu, L]. Every f_i is L-smooth and mu-strongly convex,
/// and the minimizer is the mean of the centers.
class QuadraticObjective {
 public:
  /// hessian: row-major d x d, symmetric. centers: row-major n x d.
  QuadraticObjective(std::size_t d, std::vector<double> hessian, std::vector<double> centers,
                     double mu, double L)
      : d_(d), hessian_(std::move(hessian)), centers_(std::move(centers)), mu_(mu), L_(L) {
    if (d_ == 0 || hessian_.size() != d_ * d_ || centers_.empty() || centers_.size() % d_ != 0)
      throw std::invalid_argument("QuadraticObjective: inconsistent shapes");
    n_ = centers_.size() / d_;
    mean_.assign(d_, 0.0);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < d_; ++j) mean_[j] += centers_[i * d_ + j];
    for (double& m : mean_) m /= static_cast<double>(n_);
    DenseVector diff(d_);
    double spread = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < d_; ++j) diff[j] = centers_[i * d_ + j] - mean_[j];
      spread += quad_form(diff);
    }
    min_value_ = spread / static_cast<double>(n_);
  }

  std::size_t num_samples() const { return n_; }
  std::size_t dim() const { return d_; }
  double mu() const { return mu_; }
  double smoothness() const { return L_; }
  double strong_convexity() const { return mu_; }
  std::span<const double> hessian() const { return hessian_; }
  std::span<const double> center(std::size_t i) const { return {centers_.data() + i * d_, d_}; }
  const DenseVector& minimizer() const { return mean_; }
  double min_value() const { return min_value_; }

  /// f(x) = f* + 1/2 (x - x*)^T H (x - x*); exact for a shared Hessian.
  double value(std::span<const double> x) const {
    require_dim(d_, x.size());
    return min_value_ + suboptimality(x);
  }

  double suboptimality(std::span<const double> x) const {
    DenseVector diff(d_);
    for (std::size_t j = 0; j < d_; ++j) diff[j] = x[j] - mean_[j];
    return quad_form(diff);
  }

  double sample_value(std::span<const double> x, std::size_t i) const {
    DenseVector diff(d_);
    const auto c = center(i);
    for (std::size_t j = 0; j < d_; ++j) diff[j] = x[j] - c[j];
    return quad_form(diff);
  }

  void sample_gradient(std::span<const double> x, std::size_t i, std::span<double> out) const {
    if (i >= n_) throw std::out_of_range("sample index out of range");
    require_dim(d_, x.size());
    require_dim(d_, out.size());
    const auto c = center(i);
    for (std::size_t r = 0; r < d_; ++r) {
      const double* row = hessian_.data() + r * d_;
      double s = 0.0;
      for (std::size_t j = 0; j < d_; ++j) s += row[j] * (x[j] - c[j]);
      out[r] = s;
    }
  }

  void full_gradient(std::span<const double> x, std::span<double> out) const {
    require_dim(d_, out.size());
    for (std::size_t r = 0; r < d_; ++r) {
      const double* row = hessian_.data() + r * d_;
      double s = 0.0;
      for (std::size_t j = 0; j < d_; ++j) s += row[j] * (x[j] - mean_[j]);
      out[r] = s;
    }
  }

 private:
  double quad_form(std::span<const double> v) const {
    double s = 0.0;
    for (std::size_t r = 0; r < d_; ++r) {
      const double* row = hessian_.data() + r * d_;
      double hv = 0.0;
      for (std::size_t j = 0; j < d_; ++j) hv += row[j] * v[j];
      s += v[r] * hv;
    }
    return 0.5 * s;
  }

  std::size_t d_ = 0;
  std::size_t n_ = 0;
  std::vector<double> hessian_;
  std::vector<double> centers_;
  DenseVector mean_;
  double mu_ = 0.0;
  double L_ = 0.0;
  double min_value_ = 0.0;
};

using AnyObjective = std::variant<LogisticObjective, QuadraticObjective>;

// --- generic operations -------------------------------------------------------

template <FiniteSumObjective O>
double full_value(const O& obj, std::span<const double> x) {
  require_dim(obj.dim(), x.size());
  return obj.value(x);
}

template <FiniteSumObjective O>
GradientSample stochastic_grad(const O& obj, std::span<const double> x, std::size_t i) {
  GradientSample g{i, DenseVector(obj.dim())};
  obj.sample_gradient(x, i, g.gradient);
  return g;
}

/// Draws i uniformly from rng.
template <FiniteSumObjective O>
GradientSample stochastic_grad(const O& obj, std::span<const double> x, Rng& rng) {
  return stochastic_grad(obj, x, uniform_index(rng, obj.num_samples()));
}

/// Full gradient as the exact average of the per-sample gradients.
template <FiniteSumObjective O>
DenseVector average_gradient(const O& obj, std::span<const double> x) {
  DenseVector total(obj.dim(), 0.0), g(obj.dim());
  const std::size_t n = obj.num_samples();
  for (std::size_t i = 0; i < n; ++i) {
    obj.sample_gradient(x, i, g);
    for (std::size_t j = 0; j < g.size(); ++j) total[j] += g[j];
  }
  for (double& v : total) v /= static_cast<double>(n);
  return total;
}

/// E_i ||grad f_i(x)||^2 at one point.
template <FiniteSumObjective O>
double mean_squared_gradient_norm(const O& obj, std::span<const double> x) {
  DenseVector g(obj.dim());
  double total = 0.0;
  const std::size_t n = obj.num_samples();
  for (std::size_t i = 0; i < n; ++i) {
    obj.sample_gradient(x, i, g);
    total += squared_norm(g);
  }
  return total / static_cast<double>(n);
}

/// max over points of E_i ||grad f_i(x)||^2, the plug-in for G^2.
template <FiniteSumObjective O>
double grad_norm_bound_estimate(const O& obj, const std::vector<DenseVector>& points) {
  if (points.empty()) throw std::invalid_argument("grad_norm_bound_estimate: no points");
  double best = 0.0;
  for (const auto& x : points) best = std::max(best, mean_squared_gradient_norm(obj, x));
  return best;
}

}  // namespace memsgd
