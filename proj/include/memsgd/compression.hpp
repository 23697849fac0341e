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
#include <numeric>
#include <optional>
#include <ranges>
#include <string>
#include <vector>

#include "memsgd/core.hpp"

namespace memsgd {

enum class CompressorKind { identity, top_k, rand_k, rand_p, qsgd };

inline std::string to_string(CompressorKind kind) {
  switch (kind) {
    case CompressorKind::identity: return "identity";
    case CompressorKind::top_k: return "top_k";
    case CompressorKind::rand_k: return "rand_k";
    case CompressorKind::rand_p: return "rand_p";
    case CompressorKind::qsgd: return "qsgd";
  }
  return "?";
}

inline CompressorKind compressor_kind_from_string(const std::string& s) {
  if (s == "identity") return CompressorKind::identity;
  if (s == "top_k") return CompressorKind::top_k;
  if (s == "rand_k") return CompressorKind::rand_k;
  if (s == "rand_p") return CompressorKind::rand_p;
  if (s == "qsgd") return CompressorKind::qsgd;
  throw std::invalid_argument("unknown compressor '" + s + "'");
}

/// Which operator to apply and its parameter. Only the field matching `kind`
/// is meaningful: k for top_k / rand_k, p for rand_p, s for qsgd.
struct CompressorSpec {
  CompressorKind kind = CompressorKind::identity;
  std::size_t k = 1;
  double p = 1.0;
  int s = 1;

  static CompressorSpec identity() { return {}; }
  static CompressorSpec top(std::size_t k) { return {CompressorKind::top_k, k, 1.0, 1}; }
  static CompressorSpec random(std::size_t k) { return {CompressorKind::rand_k, k, 1.0, 1}; }
  static CompressorSpec random_p(double p) { return {CompressorKind::rand_p, 1, p, 1}; }
  static CompressorSpec quantized(int s) { return {CompressorKind::qsgd, 1, 1.0, s}; }

  /// Throws std::invalid_argument when the parameter is invalid for dimension d.
  void validate(std::size_t d) const {
    switch (kind) {
      case CompressorKind::top_k:
      case CompressorKind::rand_k:
        if (k < 1 || k > d)
          throw std::invalid_argument("k must lie in [1, d]: k=" + std::to_string(k) +
                                      " d=" + std::to_string(d));
        break;
      case CompressorKind::rand_p:
        if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("p must lie in (0, 1]");
        break;
      case CompressorKind::qsgd:
        if (s < 1) throw std::invalid_argument("qsgd needs s >= 1");
        break;
      case CompressorKind::identity: break;
    }
  }

  bool operator==(const CompressorSpec&) const = default;
};

/// The contraction parameter k of the operator in dimension d: k for
/// top_k / rand_k, p for rand_p, d for identity. qsgd is not a contraction
/// in general (its variance can exceed ||x||^2), so it has none.
inline std::optional<double> contraction_parameter(const CompressorSpec& spec, std::size_t d) {
  switch (spec.kind) {
    case CompressorKind::identity: return static_cast<double>(d);
    case CompressorKind::top_k:
    case CompressorKind::rand_k: return static_cast<double>(spec.k);
    case CompressorKind::rand_p: return spec.p;
    case CompressorKind::qsgd: return std::nullopt;
  }
  return std::nullopt;
}

/// d/k used by shift and stepsize formulas. qsgd counts as dense (ratio 1).
inline double sparsity_ratio(const CompressorSpec& spec, std::size_t d) {
  const auto k = contraction_parameter(spec, d);
  return k ? static_cast<double>(d) / *k : 1.0;
}

// --- operators ----------------------------------------------------------------

enum class TieBreak { lowest_index, highest_index };

inline SparseUpdate identity_compress(std::span<const double> x) {
  SparseUpdate out(x.size());
  out.indices.resize(x.size());
  std::iota(out.indices.begin(), out.indices.end(), std::size_t{0});
  out.values.assign(x.begin(), x.end());
  return out;
}

/// The k largest-magnitude entries. Equal magnitudes go to the lower index
/// unless `tie` says otherwise; the comparator is a strict total order, so
/// the selected set does not depend on how nth_element partitions.
inline SparseUpdate top_k(std::span<const double> x, std::size_t k,
                          TieBreak tie = TieBreak::lowest_index) {
  const std::size_t d = x.size();
  if (k < 1 || k > d) throw std::invalid_argument("top_k: k must lie in [1, d]");
  const auto before = [&](std::size_t a, std::size_t b) {
    const double fa = std::abs(x[a]);
    const double fb = std::abs(x[b]);
    if (fa != fb) return fa > fb;
    return tie == TieBreak::lowest_index ? a < b : a > b;
  };
  SparseUpdate out(d);
  if (k == 1) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < d; ++i)
      if (before(i, best)) best = i;
    out.push(best, x[best]);
    return out;
  }
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (k < d) {
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     order.end(), before);
    order.resize(k);
  }
  std::sort(order.begin(), order.end());
  out.indices = std::move(order);
  out.values.reserve(k);
  for (std::size_t i : out.indices) out.values.push_back(x[i]);
  return out;
}

/// rand_k for a given subset (sorted, distinct indices).
inline SparseUpdate restrict_to(std::span<const double> x, std::span<const std::size_t> subset) {
  SparseUpdate out(x.size());
  out.indices.assign(subset.begin(), subset.end());
  out.values.reserve(subset.size());
  for (std::size_t i : subset) out.values.push_back(x[i]);
  return out;
}

/// Uniformly random k-subset of [0, d), in increasing order (Floyd's method).
inline std::vector<std::size_t> random_subset(std::size_t d, std::size_t k, Rng& rng) {
  std::vector<std::size_t> subset;
  subset.reserve(k);
  if (k == 1) {
    subset.push_back(uniform_index(rng, d));
    return subset;
  }
  std::vector<bool> taken(d, false);
  for (std::size_t j = d - k; j < d; ++j) {
    const std::size_t pick = uniform_index(rng, j + 1);
    const std::size_t chosen = taken[pick] ? j : pick;
    taken[chosen] = true;
    subset.push_back(chosen);
  }
  std::sort(subset.begin(), subset.end());
  return subset;
}

inline SparseUpdate rand_k(std::span<const double> x, std::size_t k, Rng& rng) {
  if (k < 1 || k > x.size()) throw std::invalid_argument("rand_k: k must lie in [1, d]");
  if (k == x.size()) return identity_compress(x);
  const auto subset = random_subset(x.size(), k, rng);
  return restrict_to(x, subset);
}

/// rand_p for a fixed outcome of its randomness: gate closed gives the empty
/// update, otherwise the single coordinate `coordinate`.
inline SparseUpdate rand_p_outcome(std::span<const double> x, bool gate_open,
                                   std::size_t coordinate) {
  SparseUpdate out(x.size());
  if (gate_open) out.push(coordinate, x[coordinate]);
  return out;
}

/// Bernoulli(p) gate, then one uniformly chosen coordinate.
inline SparseUpdate rand_p(std::span<const double> x, double p, Rng& rng) {
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("rand_p: p must lie in (0, 1]");
  if (x.empty()) return SparseUpdate(0);
  const bool open = p >= 1.0 || uniform_unit(rng) < p;
  if (!open) return SparseUpdate(x.size());
  return rand_p_outcome(x, true, uniform_index(rng, x.size()));
}

/// Unbiased stochastic quantization to s levels of |x_i| / ||x||_2.
/// Coordinates quantized to level 0 are omitted from the output.
inline SparseUpdate qsgd(std::span<const double> x, int s, Rng& rng) {
  if (s < 1) throw std::invalid_argument("qsgd: s must be >= 1");
  SparseUpdate out(x.size());
  const double nrm = norm(x);
  if (nrm == 0.0) return out;
  const double levels = static_cast<double>(s);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) continue;
    const double r = levels * std::abs(x[i]) / nrm;
    double level = std::floor(r);
    const double up = r - level;
    if (up > 0.0 && uniform_unit(rng) < up) level += 1.0;
    if (level == 0.0) continue;
    out.push(i, std::copysign(nrm * level / levels, x[i]));
  }
  return out;
}

/// Applies the operator described by `spec`. Randomness comes only from rng.
inline SparseUpdate compress(const CompressorSpec& spec, std::span<const double> x, Rng& rng,
                             TieBreak tie = TieBreak::lowest_index) {
  switch (spec.kind) {
    case CompressorKind::identity: return identity_compress(x);
    case CompressorKind::top_k: return top_k(x, spec.k, tie);
    case CompressorKind::rand_k: return rand_k(x, spec.k, rng);
    case CompressorKind::rand_p: return rand_p(x, spec.p, rng);
    case CompressorKind::qsgd: return qsgd(x, spec.s, rng);
  }
  throw std::logic_error("unreachable");
}

// --- contraction verification ---------------------------------------------------

enum class EstimateMode { monte_carlo, exact };

/// Calls fn(subset) for every k-subset of [0, d) in lexicographic order.
template <class Fn>
void for_each_subset(std::size_t d, std::size_t k, Fn&& fn) {
  std::vector<bool> mask(d, false);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(k), true);
  std::vector<std::size_t> subset;
  do {
    subset.clear();
    for (std::size_t i = 0; i < d; ++i)
      if (mask[i]) subset.push_back(i);
    fn(std::span<const std::size_t>(subset));
  } while (std::prev_permutation(mask.begin(), mask.end()));
}

/// E||x - comp(x)||^2 / ||x||^2.
///
/// Deterministic operators (identity, top_k) are evaluated once. In exact
/// mode rand_k averages over all C(d, k) subsets and rand_p over the gate
/// and every coordinate; qsgd has no exact mode and is always sampled.
/// Returns 0 for x = 0 (every operator maps 0 to 0).
inline double contraction_estimate(const CompressorSpec& spec, std::span<const double> x,
                                   std::size_t trials, Rng& rng,
                                   EstimateMode mode = EstimateMode::monte_carlo) {
  if (trials < 1) throw std::invalid_argument("contraction_estimate: trials must be >= 1");
  spec.validate(x.size());
  const double base = squared_norm(x);
  if (base == 0.0) return 0.0;

  if (spec.kind == CompressorKind::identity || spec.kind == CompressorKind::top_k)
    return residual_squared_norm(x, compress(spec, x, rng)) / base;

  if (mode == EstimateMode::exact && spec.kind == CompressorKind::rand_k) {
    double total = 0.0;
    std::size_t count = 0;
    for_each_subset(x.size(), spec.k, [&](std::span<const std::size_t> subset) {
      total += residual_squared_norm(x, restrict_to(x, subset));
      ++count;
    });
    return total / static_cast<double>(count) / base;
  }
  if (mode == EstimateMode::exact && spec.kind == CompressorKind::rand_p) {
    double open = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      open += residual_squared_norm(x, rand_p_outcome(x, true, i));
    open /= static_cast<double>(x.size());
    const double closed = residual_squared_norm(x, rand_p_outcome(x, false, 0));
    return (spec.p * open + (1.0 - spec.p) * closed) / base;
  }

  double total = 0.0;
  for (std::size_t t = 0; t < trials; ++t) total += residual_squared_norm(x, compress(spec, x, rng));
  return total / static_cast<double>(trials) / base;
}

}  // namespace memsgd
