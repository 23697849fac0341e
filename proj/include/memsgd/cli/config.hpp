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

// Run configuration: an INI-style file with sections, every key typed and
// known in advance. Only whole-line comments (`;` or `#`) are recognized.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "memsgd/compression.hpp"
#include "memsgd/data.hpp"
#include "memsgd/schedule.hpp"

namespace memsgd::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A stepsize or averaging shift: a number, a multiple of d/k or of d, or
/// `auto` for the smallest admissible (alpha + 2) d / k.
struct Shift {
  enum class Form { number, d_over_k, d, automatic };
  Form form = Form::number;
  double value = 1.0;  // the number, or the coefficient in front of d/k or d

  static Shift number(double v) { return {Form::number, v}; }
  static Shift d_over_k(double coef = 1.0) { return {Form::d_over_k, coef}; }
  static Shift automatic() { return {Form::automatic, 0.0}; }

  /// k is the contraction parameter of the compressor (p for rand_p).
  double resolve(double d, std::optional<double> k, double alpha) const {
    switch (form) {
      case Form::number: return value;
      case Form::d: return value * d;
      case Form::d_over_k:
      case Form::automatic:
        if (!k) throw ConfigError("shift '" + str() + "' needs a compressor with a parameter k");
        return form == Form::automatic ? shift_for(alpha, d, *k) : value * d / *k;
    }
    return value;
  }

  std::string str() const {
    const auto coef = [this] { return value == 1.0 ? std::string{} : detail::format_double(value); };
    switch (form) {
      case Form::number: return detail::format_double(value);
      case Form::d_over_k: return coef() + "d/k";
      case Form::d: return coef() + "d";
      case Form::automatic: return "auto";
    }
    return {};
  }

  bool operator==(const Shift&) const = default;
};

/// A positive number or `auto`, resolved from the problem.
using AutoNumber = std::optional<double>;

struct RunSection {
  std::string label;
  std::string mode = "sequential";
  std::uint64_t steps = 10000;
  std::uint64_t seed = 0;
  std::uint64_t workers = 1;
  bool oversubscribe = false;
  std::uint64_t checkpoint = 0;
  bool memory = true;
  bool timing = false;
  bool diagnostics = false;
  bool operator==(const RunSection&) const = default;
};

struct ProblemSection {
  std::string type = "logistic";
  std::uint64_t n = 1000;
  std::uint64_t d = 100;
  double density = 1.0;
  std::uint64_t seed = 0;
  double mu = 1.0;
  double L = 10.0;
  std::string path;
  std::string labels = "pm1";
  AutoNumber lambda;
  bool solve = true;
  bool operator==(const ProblemSection&) const = default;
};

struct CompressorSection {
  std::string kind = "top_k";
  std::uint64_t k = 1;
  double p = 0.5;
  std::uint64_t s = 16;
  bool operator==(const CompressorSection&) const = default;
};

struct ScheduleSection {
  std::string kind = "practical";
  double gamma = 2.0;
  double gamma0 = 1.0;
  double eta = 0.1;
  Shift a = Shift::d_over_k();
  double alpha = 5.0;
  AutoNumber mu;
  AutoNumber lambda;
  bool operator==(const ScheduleSection&) const = default;
};

struct AveragingSection {
  std::string kind = "weighted";
  std::optional<Shift> a;  // empty: the schedule's shift
  bool operator==(const AveragingSection&) const = default;
};

struct OutputSection {
  std::string csv;
  std::string json;
  std::string trace;
  bool operator==(const OutputSection&) const = default;
};

struct TuneSection {
  std::vector<double> grid{0.01, 0.1, 1.0, 10.0};
  std::uint64_t subsample = 0;
  bool operator==(const TuneSection&) const = default;
};

struct ProbeSection {
  std::uint64_t k = 1;
  std::uint64_t batch = 16;
  std::uint64_t trials = 2000;
  std::string point = "zero";
  bool operator==(const ProbeSection&) const = default;
};

struct RunConfig {
  RunSection run;
  ProblemSection problem;
  CompressorSection compressor;
  ScheduleSection schedule;
  AveragingSection averaging;
  OutputSection output;
  TuneSection tune;
  ProbeSection probe;
  bool operator==(const RunConfig&) const = default;
};

// --- value codecs ---------------------------------------------------------------

namespace detail {

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

template <class T>
struct Codec;

template <>
struct Codec<std::string> {
  static std::string parse(const std::string& s) { return s; }
  static std::string format(const std::string& v) { return v; }
};

template <>
struct Codec<bool> {
  static bool parse(const std::string& s) {
    const std::string v = lower(s);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("expected a boolean, got '" + s + "'");
  }
  static std::string format(bool v) { return v ? "true" : "false"; }
};

template <>
struct Codec<std::uint64_t> {
  static std::uint64_t parse(const std::string& s) {
    std::uint64_t v = 0;
    if (s.starts_with('-') || !memsgd::detail::parse_number(s, v))
      throw ConfigError("expected a nonnegative integer, got '" + s + "'");
    return v;
  }
  static std::string format(std::uint64_t v) { return std::to_string(v); }
};

template <>
struct Codec<double> {
  static double parse(const std::string& s) {
    double v = 0.0;
    if (!memsgd::detail::parse_number(s, v) || !std::isfinite(v))
      throw ConfigError("expected a finite number, got '" + s + "'");
    return v;
  }
  static std::string format(double v) { return memsgd::detail::format_double(v); }
};

template <>
struct Codec<AutoNumber> {
  static AutoNumber parse(const std::string& s) {
    if (lower(s) == "auto") return std::nullopt;
    return Codec<double>::parse(s);
  }
  static std::string format(const AutoNumber& v) { return v ? Codec<double>::format(*v) : "auto"; }
};

template <>
struct Codec<Shift> {
  static Shift parse(const std::string& raw) {
    const std::string s = lower(raw);
    if (s == "auto") return Shift::automatic();
    auto coefficient = [&](std::string_view head) {
      if (head.empty()) return 1.0;
      const double c = Codec<double>::parse(std::string(head));
      if (!(c > 0.0)) throw ConfigError("shift coefficient must be > 0 in '" + raw + "'");
      return c;
    };
    if (s.ends_with("d/k")) return {Shift::Form::d_over_k, coefficient(std::string_view(s).substr(0, s.size() - 3))};
    if (s.ends_with("d")) return {Shift::Form::d, coefficient(std::string_view(s).substr(0, s.size() - 1))};
    double v = 0.0;
    if (!memsgd::detail::parse_number(s, v) || !std::isfinite(v))
      throw ConfigError("expected a number, 'auto', '<c>d/k' or '<c>d', got '" + raw + "'");
    return Shift::number(v);
  }
  static std::string format(const Shift& v) { return v.str(); }
};

template <>
struct Codec<std::optional<Shift>> {
  static std::optional<Shift> parse(const std::string& s) {
    if (lower(s) == "schedule") return std::nullopt;
    return Codec<Shift>::parse(s);
  }
  static std::string format(const std::optional<Shift>& v) { return v ? v->str() : "schedule"; }
};

template <>
struct Codec<std::vector<double>> {
  static std::vector<double> parse(const std::string& s) {
    std::vector<double> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ','))
      out.push_back(Codec<double>::parse(std::string(memsgd::detail::trim(item))));
    return out;
  }
  static std::string format(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + Codec<double>::format(v[i]);
    return out;
  }
};

}  // namespace detail

// --- schema ---------------------------------------------------------------------

struct Field {
  std::string section;
  std::string key;
  std::vector<std::string> choices;  // empty: any value the codec accepts
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;

  std::string name() const { return section + "." + key; }
};

namespace detail {

template <class S, class T>
Field field(std::string section, std::string key, S RunConfig::*sec, T S::*member,
            std::vector<std::string> choices = {}) {
  Field f{std::move(section), std::move(key), std::move(choices), {}, {}};
  f.set = [sec, member, allowed = f.choices](RunConfig& c, const std::string& text) {
    T value = Codec<T>::parse(text);
    if constexpr (std::is_same_v<T, std::string>) {
      if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), value) == allowed.end()) {
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        throw ConfigError("'" + value + "' is not one of: " + list);
      }
    }
    (c.*sec).*member = std::move(value);
  };
  f.get = [sec, member](const RunConfig& c) { return Codec<T>::format((c.*sec).*member); };
  return f;
}

}  // namespace detail

/// Every accepted key, in serialization order.
inline const std::vector<Field>& schema() {
  using detail::field;
  static const std::vector<Field> fields = {
      field("run", "label", &RunConfig::run, &RunSection::label),
      field("run", "mode", &RunConfig::run, &RunSection::mode, {"sequential", "parallel"}),
      field("run", "steps", &RunConfig::run, &RunSection::steps),
      field("run", "seed", &RunConfig::run, &RunSection::seed),
      field("run", "workers", &RunConfig::run, &RunSection::workers),
      field("run", "oversubscribe", &RunConfig::run, &RunSection::oversubscribe),
      field("run", "checkpoint", &RunConfig::run, &RunSection::checkpoint),
      field("run", "memory", &RunConfig::run, &RunSection::memory),
      field("run", "timing", &RunConfig::run, &RunSection::timing),
      field("run", "diagnostics", &RunConfig::run, &RunSection::diagnostics),

      field("problem", "type", &RunConfig::problem, &ProblemSection::type,
            {"logistic", "quadratic", "libsvm"}),
      field("problem", "n", &RunConfig::problem, &ProblemSection::n),
      field("problem", "d", &RunConfig::problem, &ProblemSection::d),
      field("problem", "density", &RunConfig::problem, &ProblemSection::density),
      field("problem", "seed", &RunConfig::problem, &ProblemSection::seed),
      field("problem", "mu", &RunConfig::problem, &ProblemSection::mu),
      field("problem", "L", &RunConfig::problem, &ProblemSection::L),
      field("problem", "path", &RunConfig::problem, &ProblemSection::path),
      field("problem", "labels", &RunConfig::problem, &ProblemSection::labels, {"pm1", "zero_one"}),
      field("problem", "lambda", &RunConfig::problem, &ProblemSection::lambda),
      field("problem", "solve", &RunConfig::problem, &ProblemSection::solve),

      field("compressor", "kind", &RunConfig::compressor, &CompressorSection::kind,
            {"identity", "top_k", "rand_k", "rand_p", "qsgd"}),
      field("compressor", "k", &RunConfig::compressor, &CompressorSection::k),
      field("compressor", "p", &RunConfig::compressor, &CompressorSection::p),
      field("compressor", "s", &RunConfig::compressor, &CompressorSection::s),

      field("schedule", "kind", &RunConfig::schedule, &ScheduleSection::kind,
            {"theoretical", "practical", "inverse_t", "constant", "decaying"}),
      field("schedule", "gamma", &RunConfig::schedule, &ScheduleSection::gamma),
      field("schedule", "gamma0", &RunConfig::schedule, &ScheduleSection::gamma0),
      field("schedule", "eta", &RunConfig::schedule, &ScheduleSection::eta),
      field("schedule", "a", &RunConfig::schedule, &ScheduleSection::a),
      field("schedule", "alpha", &RunConfig::schedule, &ScheduleSection::alpha),
      field("schedule", "mu", &RunConfig::schedule, &ScheduleSection::mu),
      field("schedule", "lambda", &RunConfig::schedule, &ScheduleSection::lambda),

      field("averaging", "kind", &RunConfig::averaging, &AveragingSection::kind, {"weighted", "last"}),
      field("averaging", "a", &RunConfig::averaging, &AveragingSection::a),

      field("output", "csv", &RunConfig::output, &OutputSection::csv),
      field("output", "json", &RunConfig::output, &OutputSection::json),
      field("output", "trace", &RunConfig::output, &OutputSection::trace),

      field("tune", "grid", &RunConfig::tune, &TuneSection::grid),
      field("tune", "subsample", &RunConfig::tune, &TuneSection::subsample),

      field("probe", "k", &RunConfig::probe, &ProbeSection::k),
      field("probe", "batch", &RunConfig::probe, &ProbeSection::batch),
      field("probe", "trials", &RunConfig::probe, &ProbeSection::trials),
      field("probe", "point", &RunConfig::probe, &ProbeSection::point, {"zero", "optimum"}),
  };
  return fields;
}

inline const Field& find_field(const std::string& section, const std::string& key) {
  for (const auto& f : schema())
    if (f.section == section && f.key == key) return f;
  throw ConfigError("unknown key '" + section + "." + key + "'");
}

/// Sets one value; errors name the key.
inline void set_value(RunConfig& cfg, const std::string& section, const std::string& key,
                      const std::string& value) {
  const Field& f = find_field(section, key);
  try {
    f.set(cfg, std::string(memsgd::detail::trim(value)));
  } catch (const ConfigError& e) {
    throw ConfigError(f.name() + ": " + e.what());
  }
}

/// `section.key=value`, as given to --set.
inline void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
  set_value(cfg, std::string(memsgd::detail::trim(assignment.substr(0, dot))),
            std::string(memsgd::detail::trim(assignment.substr(dot + 1, eq - dot - 1))),
            assignment.substr(eq + 1));
}

/// Parses INI text on top of `base`. Unknown sections and keys are errors.
inline RunConfig parse_config(std::istream& in, RunConfig base = {}) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError("key '" + section + "' appears outside of any section");
    bool known = false;
    for (const auto& f : schema()) known = known || f.section == section;
    if (!known) throw ConfigError("unknown section [" + section + "]");
    for (const auto& [key, value] : body) set_value(base, section, key, value.data());
  }
  return base;
}

inline RunConfig parse_config(const std::string& text, RunConfig base = {}) {
  std::istringstream in(text);
  return parse_config(in, std::move(base));
}

/// Every key of every section, defaults included.
inline std::string serialize(const RunConfig& cfg) {
  std::string out, current;
  for (const auto& f : schema()) {
    if (f.section != current) {
      out += (current.empty() ? "[" : "\n[") + f.section + "]\n";
      current = f.section;
    }
    out += f.key + " = " + f.get(cfg) + "\n";
  }
  return out;
}

/// Checks that need no data. Dimension-dependent checks happen once the
/// problem is loaded and before any optimization step.
inline void validate(const RunConfig& c) {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (c.run.label.find_first_of(",\"\n\r") != std::string::npos)
    fail("run.label must not contain commas, quotes or newlines");
  if (c.run.steps < 1) fail("run.steps must be >= 1");
  if (c.run.workers < 1) fail("run.workers must be >= 1");
  if (c.run.mode == "parallel" && c.run.steps % c.run.workers != 0)
    fail("run.steps must be divisible by run.workers in parallel mode");
  if (c.run.mode == "sequential" && c.run.workers != 1)
    fail("run.workers > 1 requires run.mode = parallel");
  if (c.run.mode == "parallel" && !c.run.memory) fail("run.memory = false is sequential only");
  if (c.run.mode == "parallel" && c.run.diagnostics) fail("run.diagnostics is sequential only");
  if (c.run.mode == "sequential" && !c.output.trace.empty())
    fail("output.trace needs run.mode = parallel");

  const auto& p = c.problem;
  if (p.type == "libsvm") {
    if (p.path.empty()) fail("problem.path is required for problem.type = libsvm");
  } else {
    if (p.n < 1 || p.d < 1) fail("problem.n and problem.d must be >= 1");
  }
  if (!(p.density > 0.0 && p.density <= 1.0)) fail("problem.density must lie in (0, 1]");
  if (!(p.mu > 0.0 && p.mu <= p.L)) fail("problem needs 0 < mu <= L");
  if (p.lambda && !(*p.lambda > 0.0)) fail("problem.lambda must be > 0");
  if (p.lambda && p.type != "libsvm") fail("problem.lambda can only be set for libsvm problems");

  const auto& k = c.compressor;
  if ((k.kind == "top_k" || k.kind == "rand_k") && k.k < 1) fail("compressor.k must be >= 1");
  if (k.kind == "rand_p" && !(k.p > 0.0 && k.p <= 1.0)) fail("compressor.p must lie in (0, 1]");
  if (k.kind == "qsgd" && (k.s < 1 || k.s > (1u << 30))) fail("compressor.s must lie in [1, 2^30]");

  const auto& s = c.schedule;
  if (s.kind == "practical" && !(s.gamma > 0.0)) fail("schedule.gamma must be > 0");
  if (s.kind == "decaying" && !(s.gamma0 > 0.0)) fail("schedule.gamma0 must be > 0");
  if (s.kind == "constant" && !(s.eta > 0.0)) fail("schedule.eta must be > 0");
  if (!(s.alpha > 4.0)) fail("schedule.alpha must be > 4");
  if (s.a.form == Shift::Form::number && !(s.a.value > 0.0)) fail("schedule.a must be > 0");
  if (s.mu && !(*s.mu > 0.0)) fail("schedule.mu must be > 0");
  if (s.lambda && !(*s.lambda > 0.0)) fail("schedule.lambda must be > 0");
  if (c.averaging.a && c.averaging.a->form == Shift::Form::number && !(c.averaging.a->value > 0.0))
    fail("averaging.a must be > 0");

  if (c.tune.grid.empty()) fail("tune.grid must not be empty");
  for (double g : c.tune.grid)
    if (!(g > 0.0)) fail("tune.grid values must be > 0");
  if (c.probe.k < 1 || c.probe.batch < 1 || c.probe.trials < 1)
    fail("probe.k, probe.batch and probe.trials must be >= 1");
}

inline CompressorSpec compressor_spec(const RunConfig& c) {
  switch (compressor_kind_from_string(c.compressor.kind)) {
    case CompressorKind::identity: return CompressorSpec::identity();
    case CompressorKind::top_k: return CompressorSpec::top(c.compressor.k);
    case CompressorKind::rand_k: return CompressorSpec::random(c.compressor.k);
    case CompressorKind::rand_p: return CompressorSpec::random_p(c.compressor.p);
    case CompressorKind::qsgd: return CompressorSpec::quantized(static_cast<int>(c.compressor.s));
  }
  return {};
}

/// The schedule for a problem of dimension d whose strong-convexity modulus
/// (or regularization weight) is `problem_lambda`.
inline StepSchedule schedule_for(const RunConfig& c, std::size_t d, double problem_lambda) {
  const auto& s = c.schedule;
  const auto k = contraction_parameter(compressor_spec(c), d);
  const auto shift = [&] { return s.a.resolve(static_cast<double>(d), k, s.alpha); };
  switch (schedule_kind_from_string(s.kind)) {
    case ScheduleKind::theoretical: return StepSchedule::theoretical(s.mu.value_or(problem_lambda), shift());
    case ScheduleKind::practical: return StepSchedule::practical(s.gamma, s.lambda.value_or(problem_lambda), shift());
    case ScheduleKind::inverse_t: return StepSchedule::inverse_t();
    case ScheduleKind::constant: return StepSchedule::constant(s.eta);
    case ScheduleKind::decaying: return StepSchedule::decaying(s.gamma0, s.lambda.value_or(problem_lambda));
  }
  return {};
}

inline AveragingScheme averaging_for(const RunConfig& c, std::size_t d, const StepSchedule& schedule) {
  if (c.averaging.kind == "last") return AveragingScheme::last();
  double a = 1.0;
  if (c.averaging.a) {
    a = c.averaging.a->resolve(static_cast<double>(d), contraction_parameter(compressor_spec(c), d),
                               c.schedule.alpha);
  } else if (const auto form = schedule.theoretical_form()) {
    a = form->second;
  }
  return AveragingScheme::weighted(a);
}

/// Label used in CSV output when run.label is empty.
inline std::string run_label(const RunConfig& c) {
  if (!c.run.label.empty()) return c.run.label;
  const auto& k = c.compressor;
  if (k.kind == "top_k" || k.kind == "rand_k") return k.kind + "_" + std::to_string(k.k);
  if (k.kind == "rand_p") return "rand_p_" + detail::Codec<double>::format(k.p);
  if (k.kind == "qsgd") return "qsgd_" + std::to_string(k.s);
  return k.kind;
}

}  // namespace memsgd::cli
