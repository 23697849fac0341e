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

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "memsgd/cli/config.hpp"
#include "memsgd/cli/problem.hpp"
#include "memsgd/optimizer.hpp"
#include "memsgd/parallel.hpp"

namespace memsgd::cli {

using json = nlohmann::ordered_json;

inline constexpr const char* kCsvHeader = "label,iter,objective,subopt,mem_sq_norm,bits_cum,ms";

struct LabeledRow {
  std::string label;
  Checkpoint row;
};

/// One executed configuration: its checkpoint rows and its summary.
struct RunOutcome {
  std::string label;
  std::vector<Checkpoint> rows;
  json summary;
  std::optional<std::vector<StalenessRecord>> trace;
};

/// Shortest round-trip text; fixed notation unless the magnitude is extreme.
inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  const double a = std::abs(v);
  if (a != 0.0 && (a < 1e-5 || a >= 1e16)) return detail::Codec<double>::format(v);
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed);
  return std::string(buf, res.ptr);
}

inline void write_csv(std::ostream& out, const std::vector<RunOutcome>& runs) {
  out << kCsvHeader << '\n';
  for (const auto& r : runs)
    for (const auto& c : r.rows)
      out << r.label << ',' << c.iter << ',' << csv_number(c.objective) << ','
          << csv_number(c.subopt.value_or(std::numeric_limits<double>::quiet_NaN())) << ','
          << csv_number(c.mem_sq_norm) << ',' << csv_number(c.bits_cum) << ',' << csv_number(c.ms)
          << '\n';
}

inline void write_trace(std::ostream& out, const std::vector<StalenessRecord>& trace) {
  out << "worker,t,staleness\n";
  for (const auto& r : trace) out << r.worker << ',' << r.t << ',' << r.staleness << '\n';
}

inline json config_echo(const RunConfig& c) {
  json echo = json::object();
  for (const auto& f : schema()) echo[f.section][f.key] = f.get(c);
  return echo;
}

inline json nullable(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

/// Writes to `path`, or to `fallback` when the path is empty.
template <class Fn>
void with_output(const std::string& path, std::ostream& fallback, Fn&& fn) {
  if (path.empty()) {
    fn(fallback);
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  fn(out);
}

namespace detail {

struct Trajectory {
  std::vector<std::uint64_t> iter;
  std::vector<double> eta;
  std::vector<double> mem_sq;
  std::vector<double> grad_sq;
  std::vector<double> gap;
  std::vector<double> x_norm;
};

inline json diagnostics_json(const Trajectory& tr, const RunConfig& c, const StepSchedule& schedule,
                             std::size_t d, bool replayed) {
  json out;
  double g2 = 0.0;
  for (double v : tr.grad_sq) g2 = std::max(g2, v);
  out["g2_estimate"] = g2;
  const auto k = contraction_parameter(compressor_spec(c), d);
  if (schedule.theoretical_form() && k && c.run.memory) {
    const double ratio = static_cast<double>(d) / *k;
    const double constant = memory_constant(c.schedule.alpha);
    double worst = std::numeric_limits<double>::infinity();
    json margins = json::array();
    for (std::size_t i = 0; i < tr.iter.size(); ++i) {
      const double margin = tr.eta[i] * tr.eta[i] * constant * ratio * ratio * g2 - tr.mem_sq[i];
      worst = std::min(worst, margin);
      margins.push_back(margin);
    }
    out["memory_bound"] = {{"alpha", c.schedule.alpha},
                           {"shift_admissible",
                            shift_admissible(schedule.theoretical_form()->second, c.schedule.alpha,
                                             static_cast<double>(d), *k)},
                           {"min_margin", tr.iter.empty() ? json(nullptr) : json(worst)},
                           {"holds", worst >= 0.0},
                           {"margins", margins}};
  }
  if (replayed) {
    double worst = 0.0;
    bool holds = true;
    for (std::size_t i = 0; i < tr.gap.size(); ++i) {
      worst = std::max(worst, tr.gap[i]);
      holds = holds && tr.gap[i] <= 1e-8 * (1.0 + tr.x_norm[i]);
    }
    out["virtual_sequence"] = {{"max_gap", worst}, {"holds", holds}};
  }
  return out;
}

}  // namespace detail

/// Runs one configuration on an already loaded problem.
inline RunOutcome execute(const RunConfig& c, const SyntheticProblem& problem) {
  validate_for(c, problem);
  const std::size_t d = problem.dim();
  const CompressorSpec comp = compressor_spec(c);
  const StepSchedule schedule = schedule_for(c, d, problem.lambda);
  const AveragingScheme averaging = averaging_for(c, d, schedule);

  RunOutcome outcome;
  outcome.label = run_label(c);
  json& s = outcome.summary;
  s["label"] = outcome.label;
  s["mode"] = c.run.mode;
  s["seed"] = c.run.seed;
  s["steps"] = c.run.steps;
  s["problem"] = {{"type", c.problem.type},
                  {"n", problem.num_samples()},
                  {"d", d},
                  {"lambda", problem.lambda},
                  {"optimum_value", nullable(problem.optimum_value)}};
  json sched = {{"kind", c.schedule.kind}, {"eta0", schedule(0)}};
  if (const auto form = schedule.theoretical_form()) {
    sched["a"] = form->second;
    sched["mu_effective"] = form->first;
  }
  s["schedule"] = sched;
  s["compressor"] = {{"kind", c.compressor.kind},
                     {"k_effective", nullable(contraction_parameter(comp, d))}};

  const auto subopt = [&](double f) -> std::optional<double> {
    if (!problem.optimum_value) return std::nullopt;
    return f - *problem.optimum_value;
  };

  std::visit(
      [&](const auto& obj) {
        if (c.run.mode == "parallel") {
          ParallelConfig pc;
          pc.workers = c.run.workers;
          pc.steps_per_worker = c.run.steps / c.run.workers;
          pc.schedule = schedule;
          pc.comp = comp;
          pc.base_seed = c.run.seed;
          pc.trace = !c.output.trace.empty();
          pc.allow_oversubscription = c.run.oversubscribe;
          const ParallelResult r = run_parallel(obj, pc);
          Checkpoint row;
          row.iter = r.workers * pc.steps_per_worker;
          row.objective = obj.value(r.x);
          row.subopt = subopt(row.objective);
          for (const auto& w : r.per_worker) {
            row.mem_sq_norm += w.mem_sq_norm;
            row.bits_cum += w.bits;
          }
          if (c.run.timing) row.ms = r.wall_ms;
          outcome.rows.push_back(row);
          json par = {{"workers", r.workers}, {"steps_per_worker", pc.steps_per_worker},
                      {"total_writes", r.total_writes}};
          if (c.run.timing) par["wall_ms"] = r.wall_ms;
          if (r.trace) {
            const auto hist = staleness_probe(r.trace);
            json h = json::object();
            for (const auto& [k, n] : hist) h[std::to_string(k)] = n;
            par["staleness_mean"] = mean_staleness(hist);
            par["staleness_histogram"] = h;
          }
          s["parallel"] = par;
          s["final"] = {{"objective", row.objective}, {"subopt", nullable(row.subopt)}};
          s["bits_total"] = row.bits_cum;
          s["coordinate_writes"] = r.total_writes;
          s["mem_sq_norm"] = row.mem_sq_norm;
          outcome.trace = r.trace;
          return;
        }

        RunOptions opts;
        opts.steps = c.run.steps;
        opts.seed = c.run.seed;
        opts.averaging = averaging;
        opts.checkpoint_interval = c.run.checkpoint;
        opts.memory = c.run.memory;
        opts.timing = c.run.timing;
        opts.optimum_value = problem.optimum_value;
        opts.record_replay = c.run.diagnostics;
        detail::Trajectory tr;
        if (c.run.diagnostics) {
          opts.on_checkpoint = [&](const OptimizerState& st, const ReplayLog* log) {
            tr.iter.push_back(st.t);
            tr.eta.push_back(schedule(st.t));
            tr.mem_sq.push_back(squared_norm(st.m));
            tr.grad_sq.push_back(mean_squared_gradient_norm(obj, st.x));
            tr.x_norm.push_back(norm(st.x));
            if (log) tr.gap.push_back(virtual_gap(st, *log, obj));
          };
        }
        const RunResult r = run(obj, schedule, comp, opts);
        outcome.rows = r.metrics.rows;
        const double f_last = obj.value(r.x_final);
        const double f_avg = obj.value(r.x_avg);
        s["averaging"] = {{"kind", c.averaging.kind}, {"a", averaging.a}};
        s["final"] = {{"objective_last", f_last},
                      {"objective_avg", f_avg},
                      {"subopt_last", nullable(subopt(f_last))},
                      {"subopt_avg", nullable(subopt(f_avg))}};
        s["bits_total"] = r.bits_total;
        s["coordinate_writes"] = r.coordinate_writes;
        s["mem_sq_norm"] = squared_norm(r.memory);
        if (c.run.diagnostics) s["diagnostics"] = detail::diagnostics_json(tr, c, schedule, d, true);
      },
      problem.objective);
  s["checkpoints"] = outcome.rows.size();
  s["config"] = config_echo(c);
  return outcome;
}

// --- subcommands ----------------------------------------------------------------

inline int cmd_run(const RunConfig& c, std::ostream& out) {
  validate(c);
  const SyntheticProblem problem = load_problem(c);
  const RunOutcome r = execute(c, problem);
  with_output(c.output.csv, out, [&](std::ostream& o) { write_csv(o, {r}); });
  if (!c.output.json.empty())
    with_output(c.output.json, out, [&](std::ostream& o) { o << r.summary.dump(2) << '\n'; });
  if (r.trace) with_output(c.output.trace, out, [&](std::ostream& o) { write_trace(o, *r.trace); });
  return 0;
}

/// Runs every configuration on one shared problem and merges the rows.
/// Output paths come from the first configuration.
inline int cmd_compare(const std::vector<RunConfig>& configs, std::ostream& out) {
  if (configs.size() < 2) throw ConfigError("compare needs at least two configurations");
  for (const auto& c : configs) {
    validate(c);
    if (!(c.problem == configs.front().problem))
      throw ConfigError("compare: configurations describe different problems");
  }
  std::vector<std::string> labels;
  for (const auto& c : configs) {
    const std::string l = run_label(c);
    if (std::find(labels.begin(), labels.end(), l) != labels.end())
      throw ConfigError("compare: duplicate run label '" + l + "' (set run.label)");
    labels.push_back(l);
  }
  const SyntheticProblem problem = load_problem(configs.front());
  for (const auto& c : configs) validate_for(c, problem);
  std::vector<RunOutcome> runs;
  for (const auto& c : configs) runs.push_back(execute(c, problem));
  const auto& first = configs.front().output;
  with_output(first.csv, out, [&](std::ostream& o) { write_csv(o, runs); });
  if (!first.json.empty()) {
    json all = {{"runs", json::array()}};
    for (const auto& r : runs) all["runs"].push_back(r.summary);
    with_output(first.json, out, [&](std::ostream& o) { o << all.dump(2) << '\n'; });
  }
  return 0;
}

struct TuneRow {
  double gamma0 = 0.0;
  double objective = 0.0;
  bool diverged = false;
};

struct TuneResult {
  std::vector<TuneRow> table;
  std::optional<double> best;
};

/// Grid search over gamma0 for eta_t = gamma0 / (1 + gamma0 lambda t). A run
/// counts as diverged when its final objective is not finite or exceeds the
/// objective at the starting point.
inline TuneResult tune_gamma0(const RunConfig& c, const SyntheticProblem& full) {
  const SyntheticProblem problem = subsample(full, c.tune.subsample, c.run.seed);
  RunConfig base = c;
  base.schedule.kind = "decaying";
  base.run.mode = "sequential";
  base.run.workers = 1;
  base.run.diagnostics = false;
  TuneResult result;
  double best = std::numeric_limits<double>::infinity();
  for (double g : c.tune.grid) {
    RunConfig rc = base;
    rc.schedule.gamma0 = g;
    validate_for(rc, problem);
    const std::size_t d = problem.dim();
    const StepSchedule schedule = schedule_for(rc, d, problem.lambda);
    RunOptions opts;
    opts.steps = rc.run.steps;
    opts.seed = rc.run.seed;
    opts.averaging = averaging_for(rc, d, schedule);
    opts.checkpoint_interval = rc.run.steps;
    opts.memory = rc.run.memory;
    TuneRow row{g, 0.0, false};
    std::visit(
        [&](const auto& obj) {
          const double start = obj.value(DenseVector(d, 0.0));
          const RunResult r = run(obj, schedule, compressor_spec(rc), opts);
          row.objective = r.metrics.rows.back().objective;
          row.diverged = !std::isfinite(row.objective) || row.objective > start;
        },
        problem.objective);
    if (!row.diverged && row.objective < best) {
      best = row.objective;
      result.best = g;
    }
    result.table.push_back(row);
  }
  return result;
}

inline int cmd_tune_gamma0(const RunConfig& c, std::ostream& out, std::ostream& err) {
  validate(c);
  const SyntheticProblem problem = load_problem(c);
  const TuneResult r = tune_gamma0(c, problem);
  with_output(c.output.csv, out, [&](std::ostream& o) {
    o << "gamma0,objective,diverged\n";
    for (const auto& row : r.table)
      o << csv_number(row.gamma0) << ',' << csv_number(row.objective) << ','
        << (row.diverged ? "true" : "false") << '\n';
  });
  if (!c.output.json.empty()) {
    json j = {{"best_gamma0", nullable(r.best)}, {"table", json::array()}, {"config", config_echo(c)}};
    for (const auto& row : r.table)
      j["table"].push_back({{"gamma0", row.gamma0}, {"objective", nullable(row.objective)},
                            {"diverged", row.diverged}});
    with_output(c.output.json, out, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
  }
  if (!r.best) {
    err << "tune-gamma0: every run diverged\n";
    return 1;
  }
  err << "best gamma0 = " << csv_number(*r.best) << '\n';
  return 0;
}

inline json dataset_json(const DatasetStats& s) {
  return {{"name", s.name}, {"n", s.n}, {"d", s.d}, {"density", s.density}};
}

inline int cmd_dataset_info(const std::string& path, LabelMode labels, std::optional<std::size_t> dim,
                            bool reference, std::ostream& out) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read dataset '" + path + "'");
    LibsvmOptions opts;
    opts.labels = labels;
    opts.dim = dim;
    const Dataset ds = parse_libsvm(in, opts);
    std::size_t positives = 0;
    for (int l : ds.labels) positives += l > 0;
    json info = dataset_json(stats_of(ds, path));
    info["nnz"] = ds.nnz();
    info["positives"] = positives;
    info["negatives"] = ds.n() - positives;
    j["dataset"] = info;
  }
  if (reference) {
    j["reference"] = json::array();
    for (const auto& s : reference_datasets()) j["reference"].push_back(dataset_json(s));
  }
  out << j.dump(2) << '\n';
  return 0;
}

/// Number of k-subsets of d, saturating at `cap`.
inline std::uint64_t choose_capped(std::uint64_t d, std::uint64_t k, std::uint64_t cap) {
  k = std::min(k, d - k);
  long double r = 1.0L;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r = r * static_cast<long double>(d - k + i) / static_cast<long double>(i);
    if (r > static_cast<long double>(cap)) return cap;
  }
  return static_cast<std::uint64_t>(std::llround(static_cast<double>(r)));
}

inline int cmd_variance_probe(const RunConfig& c, std::ostream& out) {
  validate(c);
  const SyntheticProblem problem = load_problem(c);
  validate_for(c, problem);
  const std::size_t d = problem.dim();
  const DenseVector x = c.probe.point == "optimum" ? *problem.optimum : DenseVector(d, 0.0);
  json j;
  std::visit(
      [&](const auto& obj) {
        Rng rng = make_stream(c.run.seed, 0x7a71);
        const auto r = variance_probe(obj, x, c.probe.k, c.probe.batch, c.probe.trials, rng);
        const auto plain = variance_probe(obj, x, d, 1, c.probe.trials, rng);
        j = {{"d", d},
             {"k", c.probe.k},
             {"batch", c.probe.batch},
             {"trials", c.probe.trials},
             {"point", c.probe.point},
             {"d_over_k", static_cast<double>(d) / static_cast<double>(c.probe.k)},
             {"single", r.single},
             {"single_stderr", r.single_stderr},
             {"batched", r.batched},
             {"batched_stderr", r.batched_stderr},
             {"uncompressed", plain.single},
             {"uncompressed_stderr", plain.single_stderr}};
        const std::uint64_t work = choose_capped(d, c.probe.k, 2'000'001) * obj.num_samples();
        if (work <= 2'000'000) j["single_exact"] = variance_exact(obj, x, c.probe.k);
      },
      problem.objective);
  j["config"] = config_echo(c);
  with_output(c.output.json, out, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
  return 0;
}

}  // namespace memsgd::cli
