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
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace memsgd {

using DenseVector = std::vector<double>;

/// Random stream used everywhere randomness is consumed. Always passed
/// explicitly; nothing in the library holds hidden global RNG state.
using Rng = std::mt19937_64;

/// Derives an independent stream from (seed, stream_id). The sequential
/// optimizer uses stream 0, parallel worker w uses stream w.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream_id = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id),
                    static_cast<std::uint32_t>(stream_id >> 32),
                    0x6d656d73u};
  return Rng(seq);
}

/// Uniform index in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

/// Uniform double in [0, 1).
inline double uniform_unit(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

class DimensionMismatch : public std::invalid_argument {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got)
      : std::invalid_argument("dimension mismatch: expected " +
                              std::to_string(expected) + ", got " +
                              std::to_string(got)) {}
};

inline void require_dim(std::size_t expected, std::size_t got) {
  if (expected != got) throw DimensionMismatch(expected, got);
}

/// Compressed vector: (index, value) pairs with strictly increasing indices
/// in [0, dim). Explicit zeros are permitted.
struct SparseUpdate {
  std::size_t dim = 0;
  std::vector<std::size_t> indices;
  std::vector<double> values;

  SparseUpdate() = default;
  explicit SparseUpdate(std::size_t d) : dim(d) {}

  std::size_t nnz() const { return indices.size(); }
  bool empty() const { return indices.empty(); }

  void push(std::size_t index, double value) {
    indices.push_back(index);
    values.push_back(value);
  }

  DenseVector to_dense() const {
    DenseVector out(dim, 0.0);
    for (std::size_t j = 0; j < indices.size(); ++j) out[indices[j]] = values[j];
    return out;
  }

  /// target -= this
  void subtract_from(std::span<double> target) const {
    require_dim(dim, target.size());
    for (std::size_t j = 0; j < indices.size(); ++j) target[indices[j]] -= values[j];
  }

  bool operator==(const SparseUpdate&) const = default;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

inline double norm(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

/// ||x - u||^2 where u is sparse.
inline double residual_squared_norm(std::span<const double> x, const SparseUpdate& u) {
  require_dim(u.dim, x.size());
  double total = 0.0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double r = x[i];
    if (j < u.nnz() && u.indices[j] == i) r -= u.values[j++];
    total += r * r;
  }
  return total;
}

}  // namespace memsgd
