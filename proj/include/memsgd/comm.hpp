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
#include <stdexcept>
#include <vector>

#include "memsgd/compression.hpp"

// Modeled communication cost. These are bit-count estimates, not a serializer.

namespace memsgd::comm {

enum class IndexBits { ceil_log2_d, fixed };

struct CostModel {
  int value_bits = 32;
  IndexBits index_mode = IndexBits::ceil_log2_d;
  int fixed_index_bits = 0;  // used when index_mode == fixed
  int dense_bits_per_coord = 32;
};

/// ceil(log2(d)) for d >= 1; 0 for d = 1.
inline std::int64_t ceil_log2(std::uint64_t d) {
  if (d < 1) throw std::invalid_argument("ceil_log2: d must be >= 1");
  std::int64_t bits = 0;
  std::uint64_t span = 1;
  while (span < d) {
    span <<= 1;
    ++bits;
  }
  return bits;
}

inline std::int64_t index_bits(std::uint64_t d, const CostModel& model) {
  return model.index_mode == IndexBits::fixed ? model.fixed_index_bits : ceil_log2(d);
}

inline std::int64_t bits_dense(std::uint64_t d, const CostModel& model = {}) {
  return static_cast<std::int64_t>(d) * model.dense_bits_per_coord;
}

/// k (value, index) pairs.
inline std::int64_t bits_sparse(std::uint64_t k, std::uint64_t d, const CostModel& model = {}) {
  if (d < 1 || k < 1 || k > d) throw std::invalid_argument("bits_sparse: need 1 <= k <= d");
  return static_cast<std::int64_t>(k) * (model.value_bits + index_bits(d, model));
}

/// Values only, no index overhead.
inline std::int64_t bits_values_only(std::uint64_t k, const CostModel& model = {}) {
  return static_cast<std::int64_t>(k) * model.value_bits;
}

/// min{ (ceil(log2 s) + 1) d, 3 s (s + sqrt(d)) + 32 }: naive index/value
/// encoding versus the Elias-coding estimate.
inline double bits_qsgd(std::uint64_t d, std::uint64_t s) {
  if (s < 1) throw std::invalid_argument("bits_qsgd: s must be >= 1");
  const double naive = static_cast<double>(ceil_log2(s) + 1) * static_cast<double>(d);
  const double sd = static_cast<double>(s);
  const double elias = 3.0 * sd * (sd + std::sqrt(static_cast<double>(d))) + 32.0;
  return std::min(naive, elias);
}

/// QSGD that ships only the nonzero coordinates of a sparse gradient.
inline double bits_qsgd_sparse_aware(std::uint64_t nnz, std::uint64_t s) {
  return bits_qsgd(nnz, s);
}

/// Modeled bits for one transmitted update. `input_nnz` is the number of
/// nonzeros of the vector fed to the compressor (used by sparse-aware qsgd).
inline double bits_for_update(const CompressorSpec& spec, const SparseUpdate& update,
                              std::size_t input_nnz, const CostModel& model = {}) {
  const std::size_t d = update.dim;
  switch (spec.kind) {
    case CompressorKind::identity: return static_cast<double>(bits_dense(d, model));
    case CompressorKind::top_k:
    case CompressorKind::rand_k:
    case CompressorKind::rand_p:
      return update.nnz() == 0 ? 0.0 : static_cast<double>(bits_sparse(update.nnz(), d, model));
    case CompressorKind::qsgd:
      return bits_qsgd_sparse_aware(input_nnz, static_cast<std::uint64_t>(spec.s));
  }
  return 0.0;
}

/// Running prefix sum of per-iteration bits.
class BitTracker {
 public:
  void add(double bits) { total_ += bits; }
  double total() const { return total_; }

 private:
  double total_ = 0.0;
};

/// Prefix sums of a per-iteration series.
inline std::vector<double> track(const std::vector<double>& per_iteration_bits) {
  std::vector<double> cumulative;
  cumulative.reserve(per_iteration_bits.size());
  BitTracker tracker;
  for (double b : per_iteration_bits) {
    tracker.add(b);
    cumulative.push_back(tracker.total());
  }
  return cumulative;
}

}  // namespace memsgd::comm
