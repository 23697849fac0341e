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
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace memsgd {

enum class ScheduleKind { theoretical, practical, inverse_t, constant, decaying };

inline std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::theoretical: return "theoretical";
    case ScheduleKind::practical: return "practical";
    case ScheduleKind::inverse_t: return "inverse_t";
    case ScheduleKind::constant: return "constant";
    case ScheduleKind::decaying: return "decaying";
  }
  return "?";
}

inline ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "theoretical") return ScheduleKind::theoretical;
  if (s == "practical") return ScheduleKind::practical;
  if (s == "inverse_t") return ScheduleKind::inverse_t;
  if (s == "constant") return ScheduleKind::constant;
  if (s == "decaying") return ScheduleKind::decaying;
  throw std::invalid_argument("unknown schedule '" + s + "'");
}

/// Stepsize eta_t. All kinds are positive and nonincreasing in t:
///   theoretical  8 / (mu (a + t))
///   practical    gamma / (lambda (t + a))
///   inverse_t    1 / (1 + t)
///   constant     eta
///   decaying     gamma0 / (1 + gamma0 lambda t)
struct StepSchedule {
  ScheduleKind kind = ScheduleKind::constant;
  double mu = 1.0;
  double lambda = 1.0;
  double gamma = 1.0;
  double a = 1.0;
  double eta = 1.0;

  static StepSchedule theoretical(double mu, double a) {
    if (!(mu > 0.0) || !(a > 0.0)) throw std::invalid_argument("theoretical: mu, a must be > 0");
    StepSchedule s;
    s.kind = ScheduleKind::theoretical;
    s.mu = mu;
    s.a = a;
    return s;
  }
  static StepSchedule practical(double gamma, double lambda, double a) {
    if (!(gamma > 0.0) || !(lambda > 0.0) || !(a > 0.0))
      throw std::invalid_argument("practical: gamma, lambda, a must be > 0");
    StepSchedule s;
    s.kind = ScheduleKind::practical;
    s.gamma = gamma;
    s.lambda = lambda;
    s.a = a;
    return s;
  }
  static StepSchedule inverse_t() {
    StepSchedule s;
    s.kind = ScheduleKind::inverse_t;
    return s;
  }
  static StepSchedule constant(double eta) {
    if (!(eta > 0.0)) throw std::invalid_argument("constant: eta must be > 0");
    StepSchedule s;
    s.kind = ScheduleKind::constant;
    s.eta = eta;
    return s;
  }
  static StepSchedule decaying(double gamma0, double lambda) {
    if (!(gamma0 > 0.0) || !(lambda >= 0.0))
      throw std::invalid_argument("decaying: gamma0 must be > 0, lambda >= 0");
    StepSchedule s;
    s.kind = ScheduleKind::decaying;
    s.gamma = gamma0;
    s.lambda = lambda;
    return s;
  }

  double operator()(std::uint64_t step) const {
    const double t = static_cast<double>(step);
    switch (kind) {
      case ScheduleKind::theoretical: return 8.0 / (mu * (a + t));
      case ScheduleKind::practical: return gamma / (lambda * (t + a));
      case ScheduleKind::inverse_t: return 1.0 / (1.0 + t);
      case ScheduleKind::constant: return eta;
      case ScheduleKind::decaying: return gamma / (1.0 + gamma * lambda * t);
    }
    return 0.0;
  }

  /// (mu, a) such that eta_t = 8 / (mu (a + t)). For the practical schedule
  /// mu is the rescaling 8 lambda / gamma. Empty for the other kinds.
  std::optional<std::pair<double, double>> theoretical_form() const {
    if (kind == ScheduleKind::theoretical) return std::pair{mu, a};
    if (kind == ScheduleKind::practical) return std::pair{8.0 * lambda / gamma, a};
    return std::nullopt;
  }

  bool operator==(const StepSchedule&) const = default;
};

/// rho = 4 alpha / ((alpha - 4)(alpha + 1)^2)
inline double shift_rho(double alpha) {
  if (!(alpha > 4.0)) throw std::invalid_argument("alpha must be > 4");
  return 4.0 * alpha / ((alpha - 4.0) * (alpha + 1.0) * (alpha + 1.0));
}

/// Smallest shift admitted by the convergence theorem:
/// ((alpha + 1) d/k + rho) / (rho + 1).
inline double minimal_shift(double alpha, double d, double k) {
  const double rho = shift_rho(alpha);
  return ((alpha + 1.0) * (d / k) + rho) / (rho + 1.0);
}

inline bool shift_admissible(double a, double alpha, double d, double k) {
  return a > 1.0 && a >= minimal_shift(alpha, d, k);
}

/// (alpha + 2) d / k, a simple shift that always satisfies the theorem.
inline double shift_for(double alpha, double d, double k) {
  if (!(alpha > 4.0)) throw std::invalid_argument("shift_for: alpha must be > 4");
  if (!(d >= 1.0) || !(k > 0.0)) throw std::invalid_argument("shift_for: need d >= 1, k > 0");
  return (alpha + 2.0) * d / k;
}

/// 4 alpha / (alpha - 4), the constant in the memory bound.
inline double memory_constant(double alpha) {
  if (!(alpha > 4.0)) throw std::invalid_argument("alpha must be > 4");
  return 4.0 * alpha / (alpha - 4.0);
}

/// Running S_T = sum_{t<T} (a + t)^2. Also kept exactly in integers when a is
/// a nonnegative integer and the sum fits in 64 bits.
class WeightSum {
 public:
  explicit WeightSum(double a) : a_(a) {
    exact_ok_ = a >= 0.0 && a == std::floor(a) && a < 4.0e9;
  }

  double weight(std::uint64_t t) const {
    const double base = a_ + static_cast<double>(t);
    return base * base;
  }

  void add(std::uint64_t t) {
    sum_ += static_cast<long double>(weight(t));
    if (exact_ok_) {
      const std::uint64_t base = static_cast<std::uint64_t>(a_) + t;
      std::uint64_t sq = 0;
      if (__builtin_mul_overflow(base, base, &sq) || __builtin_add_overflow(exact_, sq, &exact_))
        exact_ok_ = false;
    }
  }

  long double value() const { return sum_; }
  std::optional<std::uint64_t> exact() const {
    return exact_ok_ ? std::optional<std::uint64_t>(exact_) : std::nullopt;
  }

 private:
  double a_;
  long double sum_ = 0.0L;
  std::uint64_t exact_ = 0;
  bool exact_ok_ = false;
};

/// (T/6)(2T^2 + 6aT - 3T + 6a^2 - 6a + 1), evaluated in exact integers.
inline std::optional<std::uint64_t> weight_sum_closed_form(std::uint64_t T, std::uint64_t a) {
  using u128 = unsigned __int128;
  const u128 t = T, s = a;
  const u128 inner = 2 * t * t + 6 * s * t + 6 * s * s + 1 - 3 * t - 6 * s;
  const u128 numer = t * inner;
  if (numer % 6 != 0) return std::nullopt;
  const u128 value = numer / 6;
  if (value > std::numeric_limits<std::uint64_t>::max()) return std::nullopt;
  return static_cast<std::uint64_t>(value);
}

enum class AveragingKind { weighted_quadratic, last_iterate };

struct AveragingScheme {
  AveragingKind kind = AveragingKind::weighted_quadratic;
  double a = 1.0;  // shift in w_t = (a + t)^2

  static AveragingScheme weighted(double a) { return {AveragingKind::weighted_quadratic, a}; }
  static AveragingScheme last() { return {AveragingKind::last_iterate, 1.0}; }
  bool operator==(const AveragingScheme&) const = default;
};

}  // namespace memsgd
