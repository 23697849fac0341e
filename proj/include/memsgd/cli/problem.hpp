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

#include <fstream>

#include "memsgd/cli/config.hpp"
#include "memsgd/compression.hpp"
#include "memsgd/synthetic.hpp"

namespace memsgd::cli {

/// Builds the objective named by [problem]. Synthetic problems are a pure
/// function of their section; libsvm files are read from problem.path.
inline SyntheticProblem load_problem(const RunConfig& c) {
  const auto& p = c.problem;
  if (p.type == "logistic") return make_synthetic_logistic(p.n, p.d, p.density, p.seed, p.solve);
  if (p.type == "quadratic") return make_quadratic(p.d, p.mu, p.L, p.seed, {.n = p.n});

  std::ifstream in(p.path);
  if (!in) throw std::runtime_error("cannot read dataset '" + p.path + "'");
  LibsvmOptions opts;
  opts.labels = p.labels == "zero_one" ? LabelMode::zero_one : LabelMode::strict_pm1;
  auto data = std::make_shared<Dataset>(parse_libsvm(in, opts));
  if (data->n() == 0) throw std::runtime_error("dataset '" + p.path + "' has no rows");
  const double lambda = p.lambda.value_or(1.0 / static_cast<double>(data->n()));
  LogisticObjective obj(std::move(data), lambda);
  SyntheticProblem out{obj, lambda, std::nullopt, std::nullopt};
  if (p.solve) {
    DenseVector x(obj.dim(), 0.0);
    minimize_logistic(obj, x);
    out.optimum_value = obj.value(x);
    out.optimum = std::move(x);
  }
  return out;
}

/// The checks that need the problem dimension. Run before any step.
inline void validate_for(const RunConfig& c, const SyntheticProblem& problem) {
  const std::size_t d = problem.dim();
  try {
    compressor_spec(c).validate(d);
    const StepSchedule schedule = schedule_for(c, d, problem.lambda);
    averaging_for(c, d, schedule);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.probe.k > d) throw ConfigError("probe.k must not exceed d = " + std::to_string(d));
  if (c.probe.point == "optimum" && !problem.optimum)
    throw ConfigError("probe.point = optimum needs a problem with a known optimum");
}

/// `rows` samples drawn without replacement (seeded), same dimension and
/// regularization. rows = 0 or rows >= n returns the problem unchanged.
inline SyntheticProblem subsample(const SyntheticProblem& problem, std::size_t rows, std::uint64_t seed) {
  const std::size_t n = problem.num_samples();
  if (rows == 0 || rows >= n) return problem;
  Rng rng = make_stream(seed, 0x7ab1e);
  const std::vector<std::size_t> keep = random_subset(n, rows, rng);
  if (const auto* lo = std::get_if<LogisticObjective>(&problem.objective)) {
    auto data = std::make_shared<Dataset>(lo->dataset().subset(keep));
    return {LogisticObjective(std::move(data), lo->lambda()), problem.lambda, std::nullopt, std::nullopt};
  }
  const auto& q = std::get<QuadraticObjective>(problem.objective);
  const std::size_t d = q.dim();
  std::vector<double> centers;
  centers.reserve(rows * d);
  for (std::size_t i : keep) {
    const auto c = q.center(i);
    centers.insert(centers.end(), c.begin(), c.end());
  }
  const auto h = q.hessian();
  return {QuadraticObjective(d, {h.begin(), h.end()}, std::move(centers), q.mu(), q.smoothness()),
          problem.lambda, std::nullopt, std::nullopt};
}

}  // namespace memsgd::cli
