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

// Self-checks run by `memsgd check`. Each suite is small enough to finish in
// about a second and reports a one-line detail.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "memsgd/compression.hpp"
#include "memsgd/optimizer.hpp"
#include "memsgd/schedule.hpp"
#include "memsgd/synthetic.hpp"

namespace memsgd::cli {

struct SuiteResult {
  std::string name;
  bool passed = true;
  std::string detail;
};

struct CheckOptions {
  TieBreak tie = TieBreak::lowest_index;  // test hook: highest_index corrupts the tie rule
};

namespace checks {

inline DenseVector normal_vector(Rng& rng, std::size_t d) {
  std::normal_distribution<double> g;
  DenseVector x(d);
  for (double& v : x) v = g(rng);
  return x;
}

/// Random vectors plus ones with tied magnitudes.
inline std::vector<DenseVector> probe_vectors(Rng& rng, std::size_t d, std::size_t count) {
  std::vector<DenseVector> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(normal_vector(rng, d));
  DenseVector ties(d);
  for (std::size_t j = 0; j < d; ++j) ties[j] = j % 2 ? -1.0 : 1.0;
  out.push_back(ties);
  return out;
}

inline SuiteResult contraction_enumeration(const CheckOptions& o) {
  SuiteResult r{"contraction_enumeration", true, {}};
  Rng rng = make_stream(101);
  std::size_t cases = 0;
  double worst = 0.0;
  for (std::size_t d = 2; d <= 6; ++d) {
    for (const DenseVector& x : probe_vectors(rng, d, 10)) {
      const double base = squared_norm(x);
      for (std::size_t k = 1; k <= d; ++k) {
        const double bound = 1.0 - static_cast<double>(k) / static_cast<double>(d);
        const double rk = contraction_estimate(CompressorSpec::random(k), x, 1, rng, EstimateMode::exact);
        const double tk = residual_squared_norm(x, top_k(x, k, o.tie)) / base;
        worst = std::max(worst, std::abs(rk - bound));
        if (std::abs(rk - bound) > 1e-12 || tk > bound + 1e-12) r.passed = false;
        ++cases;
      }
      for (double p : {0.1, 0.5, 1.0}) {
        const double bound = 1.0 - p / static_cast<double>(d);
        const double rp = contraction_estimate(CompressorSpec::random_p(p), x, 1, rng, EstimateMode::exact);
        worst = std::max(worst, std::abs(rp - bound));
        if (std::abs(rp - bound) > 1e-12) r.passed = false;
        ++cases;
      }
    }
  }
  r.detail = std::to_string(cases) + " cases, max |E/||x||^2 - (1 - k/d)| = " + detail::format_double(worst);
  return r;
}

inline SuiteResult tie_rule_determinism(const CheckOptions& o) {
  SuiteResult r{"tie_rule_determinism", true, {}};
  Rng rng = make_stream(102);
  std::size_t mismatches = 0, cases = 0;
  for (std::size_t d = 2; d <= 9; ++d) {
    for (int trial = 0; trial < 20; ++trial) {
      // magnitudes from a small set so ties are common
      DenseVector x(d);
      for (double& v : x) v = static_cast<double>(uniform_index(rng, 3)) * (uniform_unit(rng) < 0.5 ? -1.0 : 1.0);
      for (std::size_t k = 1; k <= d; ++k) {
        std::vector<std::size_t> order(d);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return std::abs(x[a]) > std::abs(x[b]); });
        order.resize(k);
        std::sort(order.begin(), order.end());
        mismatches += top_k(x, k, o.tie).indices != order;
        ++cases;
      }
    }
  }
  // same seed, same trajectory
  const auto p = make_quadratic(8, 1.0, 4.0, 3, {.n = 8});
  const auto& obj = std::get<QuadraticObjective>(p.objective);
  const auto sched = StepSchedule::theoretical(1.0, shift_for(5.0, 8, 2));
  OptimizerState a = make_state(8, AveragingScheme::last(), 9);
  OptimizerState b = make_state(8, AveragingScheme::last(), 9);
  for (int t = 0; t < 500; ++t) {
    step(a, obj, sched, CompressorSpec::top(2), nullptr, {.tie = o.tie});
    step(b, obj, sched, CompressorSpec::top(2), nullptr, {.tie = o.tie});
  }
  const bool reproducible = a.x == b.x && a.m == b.m;
  r.passed = mismatches == 0 && reproducible;
  r.detail = std::to_string(mismatches) + "/" + std::to_string(cases) +
             " top_k selections differ from the lowest-index rule; repeated run " +
             (reproducible ? "identical" : "differs");
  return r;
}

inline SuiteResult virtual_sequence_replay(const CheckOptions& o) {
  SuiteResult r{"virtual_sequence_replay", true, {}};
  const auto p = make_synthetic_logistic(200, 20, 0.5, 11, false);
  const auto& obj = std::get<LogisticObjective>(p.objective);
  double worst = 0.0;
  std::size_t checked = 0;
  for (const CompressorSpec& comp : {CompressorSpec::top(1), CompressorSpec::random(1)}) {
    RunOptions opts;
    opts.steps = 2000;
    opts.seed = 5;
    opts.checkpoint_interval = 200;
    opts.averaging = AveragingScheme::last();
    opts.record_replay = true;
    opts.step.tie = o.tie;
    opts.on_checkpoint = [&](const OptimizerState& st, const ReplayLog* log) {
      const double gap = virtual_gap(st, *log, obj);
      worst = std::max(worst, gap);
      if (gap > 1e-8 * (1.0 + norm(st.x))) r.passed = false;
      ++checked;
    };
    run(obj, StepSchedule::practical(2.0, p.lambda, shift_for(5.0, 20, 1)), comp, opts);
  }
  r.detail = std::to_string(checked) + " checkpoints, max ||x~ - x + m|| = " + detail::format_double(worst);
  return r;
}

inline SuiteResult memory_bound(const CheckOptions& o) {
  SuiteResult r{"memory_bound_margin", true, {}};
  const std::size_t d = 20;
  const auto p = make_quadratic(d, 1.0, 10.0, 12, {.n = 20});
  const auto& obj = std::get<QuadraticObjective>(p.objective);
  const auto sched = StepSchedule::theoretical(p.lambda, 7.0 * d);
  double worst = std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::vector<double> eta, mem, grad;
    RunOptions opts;
    opts.steps = 3000;
    opts.seed = seed;
    opts.checkpoint_interval = 50;
    opts.averaging = AveragingScheme::last();
    opts.step.tie = o.tie;
    opts.on_checkpoint = [&](const OptimizerState& st, const ReplayLog*) {
      eta.push_back(sched(st.t));
      mem.push_back(squared_norm(st.m));
      grad.push_back(mean_squared_gradient_norm(obj, st.x));
    };
    run(obj, sched, CompressorSpec::top(1), opts);
    const double g2 = *std::max_element(grad.begin(), grad.end());
    for (std::size_t i = 0; i < eta.size(); ++i) {
      const double margin = eta[i] * eta[i] * memory_constant(5.0) * double(d * d) * g2 - mem[i];
      worst = std::min(worst, margin);
    }
  }
  r.passed = worst >= 0.0;
  r.detail = "3 seeds, min margin = " + detail::format_double(worst);
  return r;
}

inline SuiteResult weight_sum(const CheckOptions&) {
  SuiteResult r{"weight_sum_closed_form", true, {}};
  std::size_t checked = 0;
  for (std::uint64_t a : {1u, 2u, 7u, 14000u}) {
    WeightSum s(static_cast<double>(a));
    for (std::uint64_t T = 1; T <= 10000; ++T) {
      s.add(T - 1);
      const auto exact = s.exact();
      const auto closed = weight_sum_closed_form(T, a);
      const double cube = static_cast<double>(T) * static_cast<double>(T) * static_cast<double>(T) / 3.0;
      if (!exact || !closed || *exact != *closed || static_cast<double>(*exact) < cube) r.passed = false;
      ++checked;
    }
  }
  r.detail = std::to_string(checked) + " (a, T) pairs";
  return r;
}

template <class O>
double fd_error(const O& obj, Rng& rng) {
  const std::size_t d = obj.dim();
  DenseVector x = normal_vector(rng, d);
  const std::size_t i = uniform_index(rng, obj.num_samples());
  DenseVector analytic(d), numeric(d);
  obj.sample_gradient(x, i, analytic);
  const double h = 1e-6;
  for (std::size_t j = 0; j < d; ++j) {
    const double keep = x[j];
    x[j] = keep + h;
    const double up = obj.sample_value(x, i);
    x[j] = keep - h;
    const double down = obj.sample_value(x, i);
    x[j] = keep;
    numeric[j] = (up - down) / (2.0 * h);
  }
  return std::sqrt(squared_distance(analytic, numeric)) /
         std::max({norm(analytic), norm(numeric), 1e-8});
}

inline SuiteResult gradient_finite_difference(const CheckOptions&) {
  SuiteResult r{"gradient_finite_difference", true, {}};
  Rng rng = make_stream(103);
  const auto lp = make_synthetic_logistic(50, 12, 0.5, 13, false);
  const auto qp = make_quadratic(12, 1.0, 10.0, 14);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    worst = std::max(worst, fd_error(std::get<LogisticObjective>(lp.objective), rng));
    worst = std::max(worst, fd_error(std::get<QuadraticObjective>(qp.objective), rng));
  }
  r.passed = worst < 1e-5;
  r.detail = "40 points, max relative error = " + detail::format_double(worst);
  return r;
}

}  // namespace checks

/// Every suite, each exactly once.
inline std::vector<SuiteResult> run_checks(const CheckOptions& o = {}) {
  return {checks::contraction_enumeration(o), checks::tie_rule_determinism(o),
          checks::virtual_sequence_replay(o), checks::memory_bound(o), checks::weight_sum(o),
          checks::gradient_finite_difference(o)};
}

inline int cmd_check(const CheckOptions& o, bool as_json, std::ostream& out) {
  const auto results = run_checks(o);
  bool all = true;
  nlohmann::ordered_json j = {{"suites", nlohmann::ordered_json::array()}};
  for (const auto& r : results) {
    all = all && r.passed;
    if (as_json)
      j["suites"].push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
    else
      out << r.name << '\t' << (r.passed ? "pass" : "fail") << '\t' << r.detail << '\n';
  }
  if (as_json) {
    j["passed"] = all;
    out << j.dump(2) << '\n';
  }
  return all ? 0 : 2;
}

}  // namespace memsgd::cli
