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
#include <atomic>
#include <chrono>
#include <latch>
#include <map>
#include <optional>
#include <thread>
#include <vector>

#include "memsgd/comm.hpp"
#include "memsgd/compression.hpp"
#include "memsgd/objective.hpp"
#include "memsgd/schedule.hpp"

namespace memsgd {

/// Shared-memory Mem-SGD: every worker keeps a private memory and subtracts
/// its compressed update from one shared x without locks.
struct ParallelConfig {
  std::size_t workers = 1;
  std::uint64_t steps_per_worker = 1;
  StepSchedule schedule = StepSchedule::inverse_t();
  CompressorSpec comp = CompressorSpec::top(1);
  std::uint64_t base_seed = 0;
  bool trace = false;
  bool allow_oversubscription = false;
  comm::CostModel cost{};
  std::optional<DenseVector> x0;
};

struct WorkerMetrics {
  std::size_t worker = 0;
  std::uint64_t steps = 0;
  std::uint64_t coordinate_writes = 0;
  double bits = 0.0;
  double mem_sq_norm = 0.0;
};

/// Coordinates of x changed by other workers between this step's read of x
/// and its write.
struct StalenessRecord {
  std::size_t worker = 0;
  std::uint64_t t = 0;
  std::size_t staleness = 0;
};

struct ParallelResult {
  DenseVector x;
  std::size_t workers = 0;  // after capping
  std::vector<WorkerMetrics> per_worker;
  std::uint64_t total_writes = 0;
  std::optional<std::vector<StalenessRecord>> trace;
  double wall_ms = 0.0;
};

inline std::size_t effective_workers(std::size_t requested, bool allow_oversubscription) {
  if (requested < 1) throw std::invalid_argument("parallel: need at least one worker");
  if (allow_oversubscription) return requested;
  const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  return std::min(requested, hw);
}

/// Runs all workers to completion and returns the shared iterate.
///
/// Each coordinate of x is read and updated through std::atomic_ref with
/// relaxed ordering: individual values are never torn, the vector as a whole
/// may be inconsistent. Worker w samples from stream (base_seed, w); with a
/// single worker the trajectory equals the sequential run of the same seed.
/// The gradient computed at the read snapshot is reused for the memory update.
template <FiniteSumObjective O>
ParallelResult run_parallel(const O& obj, const ParallelConfig& cfg) {
  const std::size_t d = obj.dim();
  const std::size_t n = obj.num_samples();
  cfg.comp.validate(d);
  const std::size_t W = effective_workers(cfg.workers, cfg.allow_oversubscription);

  DenseVector shared = cfg.x0 ? *cfg.x0 : DenseVector(d, 0.0);
  require_dim(d, shared.size());
  std::vector<std::atomic<std::uint64_t>> versions(cfg.trace ? d : 0);

  ParallelResult result;
  result.workers = W;
  result.per_worker.resize(W);
  std::vector<std::vector<StalenessRecord>> traces(W);
  std::latch start(static_cast<std::ptrdiff_t>(W));

  auto worker = [&](std::size_t w) {
    Rng rng = make_stream(cfg.base_seed, w);
    DenseVector m(d, 0.0), snapshot(d), grad(d);
    std::vector<std::uint64_t> seen(cfg.trace ? d : 0);
    WorkerMetrics& metrics = result.per_worker[w];
    metrics.worker = w;
    if (cfg.trace) traces[w].reserve(cfg.steps_per_worker);
    start.arrive_and_wait();

    for (std::uint64_t t = 0; t < cfg.steps_per_worker; ++t) {
      const std::size_t i = uniform_index(rng, n);
      if (cfg.trace)
        for (std::size_t j = 0; j < d; ++j) seen[j] = versions[j].load(std::memory_order_relaxed);
      for (std::size_t j = 0; j < d; ++j)
        snapshot[j] = std::atomic_ref<double>(shared[j]).load(std::memory_order_relaxed);
      obj.sample_gradient(snapshot, i, grad);
      const double eta = cfg.schedule(t);
      std::size_t input_nnz = 0;
      for (std::size_t j = 0; j < d; ++j) {
        m[j] = m[j] + eta * grad[j];
        input_nnz += m[j] != 0.0;
      }
      const SparseUpdate g = compress(cfg.comp, m, rng);
      if (cfg.trace) {
        std::size_t stale = 0;
        for (std::size_t j = 0; j < d; ++j)
          stale += versions[j].load(std::memory_order_relaxed) != seen[j];
        traces[w].push_back({w, t, stale});
      }
      for (std::size_t j = 0; j < g.nnz(); ++j) {
        const std::size_t c = g.indices[j];
        std::atomic_ref<double>(shared[c]).fetch_sub(g.values[j], std::memory_order_relaxed);
        m[c] -= g.values[j];
        if (cfg.trace) versions[c].fetch_add(1, std::memory_order_relaxed);
      }
      metrics.coordinate_writes += g.nnz();
      metrics.bits += comm::bits_for_update(cfg.comp, g, input_nnz, cfg.cost);
      ++metrics.steps;
    }
    metrics.mem_sq_norm = squared_norm(m);
  };

  const auto t0 = std::chrono::steady_clock::now();
  {
    std::vector<std::jthread> threads;
    threads.reserve(W);
    for (std::size_t w = 0; w < W; ++w) threads.emplace_back(worker, w);
  }
  result.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  result.x = std::move(shared);
  for (const auto& wm : result.per_worker) result.total_writes += wm.coordinate_writes;
  if (cfg.trace) {
    std::vector<StalenessRecord> merged;
    for (auto& tr : traces) merged.insert(merged.end(), tr.begin(), tr.end());
    result.trace = std::move(merged);
  }
  return result;
}

/// Histogram staleness -> number of steps. Throws if tracing was disabled.
inline std::map<std::size_t, std::uint64_t> staleness_probe(
    const std::optional<std::vector<StalenessRecord>>& trace) {
  if (!trace) throw std::logic_error("staleness_probe: tracing was not enabled");
  std::map<std::size_t, std::uint64_t> histogram;
  for (const auto& r : *trace) ++histogram[r.staleness];
  return histogram;
}

inline double mean_staleness(const std::map<std::size_t, std::uint64_t>& histogram) {
  double num = 0.0, den = 0.0;
  for (const auto& [s, c] : histogram) {
    num += static_cast<double>(s) * static_cast<double>(c);
    den += static_cast<double>(c);
  }
  return den == 0.0 ? 0.0 : num / den;
}

}  // namespace memsgd
