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

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "memsgd/comm.hpp"
#include "memsgd/compression.hpp"
#include "memsgd/objective.hpp"
#include "memsgd/schedule.hpp"

namespace memsgd {

/// Iterate, error memory and averaging accumulator of one sequential run.
///
/// Each step draws i_t, forms v = m_t + eta_t grad f_{i_t}(x_t), transmits
/// g_t = comp(v), and sets x_{t+1} = x_t - g_t, m_{t+1} = v - g_t. Only the
/// coordinates of g_t are written to x. With memory disabled m stays zero
/// and the compressed gradient is applied directly (the unbiased-compressor
/// baseline).
struct OptimizerState {
  DenseVector x;
  DenseVector m;
  std::uint64_t t = 0;
  AveragingScheme averaging;
  DenseVector avg_accumulator;  // sum_t w_t x_t
  WeightSum weight_sum{1.0};
  Rng rng;
  bool memory = true;
  double bits_total = 0.0;
  std::uint64_t coordinate_writes = 0;

  DenseVector scratch;  // gradient buffer, not part of the logical state

  OptimizerState(DenseVector x0, AveragingScheme avg, Rng stream, bool use_memory = true)
      : x(std::move(x0)),
        m(x.size(), 0.0),
        averaging(avg),
        avg_accumulator(x.size(), 0.0),
        weight_sum(avg.a),
        rng(std::move(stream)),
        memory(use_memory),
        scratch(x.size(), 0.0) {}

  /// x-bar_t = (sum w_t x_t) / S_t under weighted averaging; x_t otherwise
  /// (and before the first step).
  DenseVector estimate() const {
    if (averaging.kind != AveragingKind::weighted_quadratic || t == 0) return x;
    const long double s = weight_sum.value();
    DenseVector out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j)
      out[j] = static_cast<double>(static_cast<long double>(avg_accumulator[j]) / s);
    return out;
  }
};

inline OptimizerState make_state(std::size_t d, AveragingScheme avg, std::uint64_t seed,
                                 bool memory = true) {
  return OptimizerState(DenseVector(d, 0.0), avg, make_stream(seed, 0), memory);
}

/// What one step consumed and emitted; enough to replay the iterates.
struct ReplayEntry {
  std::size_t index = 0;
  double eta = 0.0;
  SparseUpdate applied;
};

struct ReplayLog {
  DenseVector x0;
  std::vector<ReplayEntry> entries;
};

struct StepOptions {
  comm::CostModel cost{};
  TieBreak tie = TieBreak::lowest_index;
};

template <FiniteSumObjective O>
void step(OptimizerState& st, const O& obj, const StepSchedule& schedule,
          const CompressorSpec& comp, ReplayLog* log = nullptr, const StepOptions& opts = {}) {
  const std::size_t d = obj.dim();
  require_dim(d, st.x.size());
  require_dim(d, st.m.size());

  const std::size_t i = uniform_index(st.rng, obj.num_samples());
  obj.sample_gradient(st.x, i, st.scratch);
  const double eta = schedule(st.t);

  if (st.averaging.kind == AveragingKind::weighted_quadratic) {
    const double w = st.weight_sum.weight(st.t);
    for (std::size_t j = 0; j < d; ++j) st.avg_accumulator[j] += w * st.x[j];
    st.weight_sum.add(st.t);
  }

  DenseVector& v = st.memory ? st.m : st.scratch;
  std::size_t input_nnz = 0;
  for (std::size_t j = 0; j < d; ++j) {
    const double value = st.memory ? st.m[j] + eta * st.scratch[j] : eta * st.scratch[j];
    v[j] = value;
    input_nnz += value != 0.0;
  }

  SparseUpdate g = compress(comp, v, st.rng, opts.tie);
  for (std::size_t j = 0; j < g.nnz(); ++j) {
    st.x[g.indices[j]] -= g.values[j];
    if (st.memory) st.m[g.indices[j]] -= g.values[j];
  }
  st.coordinate_writes += g.nnz();
  st.bits_total += comm::bits_for_update(comp, g, input_nnz, opts.cost);
  if (log) log->entries.push_back({i, eta, std::move(g)});
  ++st.t;
}

// --- run ------------------------------------------------------------------------

struct Checkpoint {
  std::uint64_t iter = 0;
  double objective = 0.0;
  std::optional<double> subopt;
  double mem_sq_norm = 0.0;
  double bits_cum = 0.0;
  double ms = 0.0;
};

struct RunMetrics {
  std::vector<Checkpoint> rows;
};

struct RunOptions {
  std::uint64_t steps = 1;
  std::uint64_t seed = 0;
  AveragingScheme averaging = AveragingScheme::weighted(1.0);
  std::uint64_t checkpoint_interval = 0;  // 0: n / 10 (ten per epoch)
  bool memory = true;
  bool record_replay = false;
  bool timing = false;  // when false the ms column stays 0 so output is reproducible
  std::optional<double> optimum_value;
  std::optional<DenseVector> x0;
  StepOptions step{};
  std::function<void(const OptimizerState&, const ReplayLog*)> on_checkpoint;
};

struct RunResult {
  DenseVector x_final;
  DenseVector x_avg;
  RunMetrics metrics;
  std::optional<ReplayLog> replay;
  std::uint64_t coordinate_writes = 0;
  double bits_total = 0.0;
  DenseVector memory;
};

/// Iterations at which checkpoints are recorded: every `interval` steps and
/// always at T.
inline std::vector<std::uint64_t> checkpoint_iterations(std::uint64_t T, std::uint64_t interval) {
  std::vector<std::uint64_t> out;
  if (interval == 0) interval = 1;
  for (std::uint64_t t = interval; t < T; t += interval) out.push_back(t);
  out.push_back(T);
  return out;
}

template <FiniteSumObjective O>
RunResult run(const O& obj, const StepSchedule& schedule, const CompressorSpec& comp,
              const RunOptions& opts) {
  if (opts.steps < 1) throw std::invalid_argument("run: T must be >= 1");
  const std::size_t d = obj.dim();
  comp.validate(d);
  DenseVector x0 = opts.x0 ? *opts.x0 : DenseVector(d, 0.0);
  require_dim(d, x0.size());

  OptimizerState st(x0, opts.averaging, make_stream(opts.seed, 0), opts.memory);
  RunResult result;
  ReplayLog* log = nullptr;
  if (opts.record_replay) {
    result.replay = ReplayLog{x0, {}};
    result.replay->entries.reserve(opts.steps);
    log = &*result.replay;
  }

  const std::uint64_t interval =
      opts.checkpoint_interval ? opts.checkpoint_interval
                               : std::max<std::uint64_t>(1, obj.num_samples() / 10);
  const auto marks = checkpoint_iterations(opts.steps, interval);
  const auto start = std::chrono::steady_clock::now();
  std::size_t next = 0;
  while (st.t < opts.steps) {
    step(st, obj, schedule, comp, log, opts.step);
    if (next < marks.size() && st.t == marks[next]) {
      ++next;
      Checkpoint row;
      row.iter = st.t;
      row.objective = obj.value(st.estimate());
      if (opts.optimum_value) row.subopt = row.objective - *opts.optimum_value;
      row.mem_sq_norm = squared_norm(st.m);
      row.bits_cum = st.bits_total;
      if (opts.timing)
        row.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                     .count();
      result.metrics.rows.push_back(row);
      if (opts.on_checkpoint) opts.on_checkpoint(st, log);
    }
  }
  result.x_avg = st.estimate();
  result.x_final = st.x;
  result.memory = st.m;
  result.coordinate_writes = st.coordinate_writes;
  result.bits_total = st.bits_total;
  return result;
}

// --- diagnostics ----------------------------------------------------------------

/// Replays the logged samples from x_0, forms the uncompressed sequence
/// x~_t = x_0 - sum_j eta_j grad f_{i_j}(x_j) and returns ||(x~_t - x_t) + m_t||.
/// Since x_t = x_0 - sum_j g_j and m_t = sum_j (eta_j grad f_{i_j}(x_j) - g_j),
/// the uncompressed sequence trails the iterate by exactly the memory.
/// The iterates x_j are rebuilt from the logged updates, independently of
/// the memory bookkeeping.
template <FiniteSumObjective O>
double virtual_gap(const OptimizerState& st, const ReplayLog& log, const O& obj) {
  if (log.entries.size() != st.t)
    throw std::invalid_argument("virtual_gap: log has " + std::to_string(log.entries.size()) +
                                " entries, state is at t=" + std::to_string(st.t));
  const std::size_t d = obj.dim();
  DenseVector x = log.x0;
  DenseVector uncompressed = log.x0;
  DenseVector g(d);
  for (const auto& e : log.entries) {
    obj.sample_gradient(x, e.index, g);
    for (std::size_t j = 0; j < d; ++j) uncompressed[j] -= e.eta * g[j];
    e.applied.subtract_from(x);
  }
  double gap = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double r = (uncompressed[j] - st.x[j]) + st.m[j];
    gap += r * r;
  }
  return std::sqrt(gap);
}

/// eta_t^2 (4 alpha / (alpha - 4)) (d/k)^2 G^2 - ||m_t||^2. The memory bound
/// holds in expectation; a nonnegative margin along one trajectory is the
/// runtime surrogate.
inline double memory_bound_margin(const OptimizerState& st, const StepSchedule& schedule,
                                  double alpha, double d, double k, double g2) {
  if (!schedule.theoretical_form())
    throw std::invalid_argument("memory_bound_margin: schedule must be theoretical or practical");
  const double eta = schedule(st.t);
  const double ratio = d / k;
  const double bound = eta * eta * memory_constant(alpha) * ratio * ratio * g2;
  return bound - squared_norm(st.m);
}

struct VarianceProbeResult {
  double single = 0.0;
  double single_stderr = 0.0;
  double batched = 0.0;
  double batched_stderr = 0.0;
};

/// Monte Carlo E||(d/k) rand_k(grad f_i(x)) - grad f(x)||^2 for one sample
/// and for the average of `batch` independent samples.
template <FiniteSumObjective O>
VarianceProbeResult variance_probe(const O& obj, std::span<const double> x, std::size_t k,
                                   std::size_t batch, std::size_t trials, Rng& rng) {
  const std::size_t d = obj.dim();
  if (k < 1 || k > d) throw std::invalid_argument("variance_probe: k must lie in [1, d]");
  if (trials < 1 || batch < 1) throw std::invalid_argument("variance_probe: trials, batch >= 1");
  const DenseVector full = average_gradient(obj, x);
  const double scale = static_cast<double>(d) / static_cast<double>(k);
  DenseVector g(d), est(d);

  auto sample_estimate = [&](std::size_t b) {
    std::fill(est.begin(), est.end(), 0.0);
    for (std::size_t r = 0; r < b; ++r) {
      obj.sample_gradient(x, uniform_index(rng, obj.num_samples()), g);
      const SparseUpdate kept = rand_k(g, k, rng);
      for (std::size_t j = 0; j < kept.nnz(); ++j)
        est[kept.indices[j]] += scale * kept.values[j] / static_cast<double>(b);
    }
    return squared_distance(est, full);
  };
  auto moments = [&](std::size_t b, double& mean, double& se) {
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      const double v = sample_estimate(b);
      s1 += v;
      s2 += v * v;
    }
    const double nt = static_cast<double>(trials);
    mean = s1 / nt;
    const double var = trials > 1 ? std::max(0.0, (s2 - nt * mean * mean) / (nt - 1.0)) : 0.0;
    se = std::sqrt(var / nt);
  };

  VarianceProbeResult out;
  moments(1, out.single, out.single_stderr);
  moments(batch, out.batched, out.batched_stderr);
  return out;
}

/// The single-sample variance of the probe, by enumeration over every sample
/// index and every k-subset.
template <FiniteSumObjective O>
double variance_exact(const O& obj, std::span<const double> x, std::size_t k) {
  const std::size_t d = obj.dim();
  if (k < 1 || k > d) throw std::invalid_argument("variance_exact: k must lie in [1, d]");
  const DenseVector full = average_gradient(obj, x);
  const double scale = static_cast<double>(d) / static_cast<double>(k);
  DenseVector g(d), est(d);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < obj.num_samples(); ++i) {
    obj.sample_gradient(x, i, g);
    for_each_subset(d, k, [&](std::span<const std::size_t> subset) {
      std::fill(est.begin(), est.end(), 0.0);
      for (std::size_t j : subset) est[j] = scale * g[j];
      total += squared_distance(est, full);
      ++count;
    });
  }
  return total / static_cast<double>(count);
}

}  // namespace memsgd
