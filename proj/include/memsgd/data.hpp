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
#include <charconv>
#include <cstdint>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "memsgd/core.hpp"

namespace memsgd {

/// Row-sparse example matrix with +-1 labels. Indices are 0-based in memory;
/// the LIBSVM wire format is 1-based.
struct Dataset {
  std::vector<std::size_t> row_ptr{0};  // CSR offsets, size n + 1
  std::vector<std::size_t> col;
  std::vector<double> val;
  std::vector<int> labels;
  std::size_t d = 0;

  std::size_t n() const { return labels.size(); }
  std::size_t nnz() const { return col.size(); }

  double density() const {
    const double cells = static_cast<double>(n()) * static_cast<double>(d);
    return cells == 0.0 ? 0.0 : static_cast<double>(nnz()) / cells;
  }

  std::span<const std::size_t> row_indices(std::size_t i) const {
    return {col.data() + row_ptr[i], row_ptr[i + 1] - row_ptr[i]};
  }
  std::span<const double> row_values(std::size_t i) const {
    return {val.data() + row_ptr[i], row_ptr[i + 1] - row_ptr[i]};
  }

  /// Appends a row; indices must be strictly increasing and < d (d grows if
  /// grow_dim is set).
  void add_row(std::span<const std::size_t> idx, std::span<const double> v, int label,
               bool grow_dim = false) {
    if (label != 1 && label != -1) throw std::invalid_argument("label must be +1 or -1");
    for (std::size_t j = 0; j < idx.size(); ++j) {
      if (j > 0 && idx[j] <= idx[j - 1])
        throw std::invalid_argument("row indices must be strictly increasing");
      if (idx[j] >= d) {
        if (!grow_dim) throw std::invalid_argument("row index out of range");
        d = idx[j] + 1;
      }
    }
    col.insert(col.end(), idx.begin(), idx.end());
    val.insert(val.end(), v.begin(), v.end());
    row_ptr.push_back(col.size());
    labels.push_back(label);
  }

  double row_dot(std::size_t i, std::span<const double> x) const {
    double s = 0.0;
    for (std::size_t j = row_ptr[i]; j < row_ptr[i + 1]; ++j) s += val[j] * x[col[j]];
    return s;
  }

  double row_squared_norm(std::size_t i) const {
    double s = 0.0;
    for (std::size_t j = row_ptr[i]; j < row_ptr[i + 1]; ++j) s += val[j] * val[j];
    return s;
  }

  /// Rows [subset] in the given order, same d.
  Dataset subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.d = d;
    for (std::size_t i : rows) out.add_row(row_indices(i), row_values(i), labels[i]);
    return out;
  }

  bool operator==(const Dataset&) const = default;
};

struct DatasetStats {
  std::string name;
  std::size_t n = 0;
  std::size_t d = 0;
  double density = 0.0;
};

inline DatasetStats stats_of(const Dataset& ds, std::string name = {}) {
  return {std::move(name), ds.n(), ds.d, ds.density()};
}

/// Published statistics of the two benchmark sets the desk-scale synthetic
/// problems stand in for.
inline const std::vector<DatasetStats>& reference_datasets() {
  static const std::vector<DatasetStats> table{
      {"epsilon", 400000, 2000, 1.0},
      {"rcv1-test", 677399, 47236, 0.0015},
  };
  return table;
}

// --- LIBSVM text format -----------------------------------------------------

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class LabelMode { strict_pm1, zero_one };

struct LibsvmOptions {
  LabelMode labels = LabelMode::strict_pm1;
  std::optional<std::size_t> dim;  // overrides max-index + 1 inference
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

/// Parses `<label> <idx>:<val> ...` lines (1-based indices). Blank lines and
/// `#` comments are skipped. Throws ParseError; never returns a partial set.
inline Dataset parse_libsvm(std::istream& in, const LibsvmOptions& opts = {}) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::size_t> idx;
  std::vector<double> vals;
  std::size_t max_index_plus_one = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest = line;
    if (const auto hash = rest.find('#'); hash != std::string_view::npos)
      rest = rest.substr(0, hash);
    rest = detail::trim(rest);
    if (rest.empty()) continue;

    idx.clear();
    vals.clear();
    std::size_t pos = rest.find_first_of(" \t");
    const std::string_view label_tok = rest.substr(0, pos);
    double raw_label = 0.0;
    if (!detail::parse_number(label_tok, raw_label))
      throw ParseError(line_no, "malformed label '" + std::string(label_tok) + "'");
    int label = 0;
    if (raw_label == 1.0) {
      label = 1;
    } else if (raw_label == -1.0) {
      label = -1;
    } else if (raw_label == 0.0 && opts.labels == LabelMode::zero_one) {
      label = -1;
    } else {
      throw ParseError(line_no, "label outside accepted set: '" + std::string(label_tok) + "'");
    }

    while (pos != std::string_view::npos) {
      rest = detail::trim(rest.substr(pos));
      if (rest.empty()) break;
      pos = rest.find_first_of(" \t");
      const std::string_view tok = rest.substr(0, pos);
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos)
        throw ParseError(line_no, "malformed feature '" + std::string(tok) + "'");
      std::size_t one_based = 0;
      double v = 0.0;
      if (!detail::parse_number(tok.substr(0, colon), one_based) || one_based == 0)
        throw ParseError(line_no, "malformed index in '" + std::string(tok) + "'");
      if (!detail::parse_number(tok.substr(colon + 1), v))
        throw ParseError(line_no, "malformed value in '" + std::string(tok) + "'");
      const std::size_t zero_based = one_based - 1;
      if (!idx.empty() && zero_based <= idx.back())
        throw ParseError(line_no, "indices not strictly increasing at '" + std::string(tok) + "'");
      if (opts.dim && zero_based >= *opts.dim)
        throw ParseError(line_no, "index " + std::to_string(one_based) + " exceeds dimension " +
                                      std::to_string(*opts.dim));
      idx.push_back(zero_based);
      vals.push_back(v);
    }
    if (!idx.empty()) max_index_plus_one = std::max(max_index_plus_one, idx.back() + 1);
    ds.d = std::max(ds.d, max_index_plus_one);
    ds.add_row(idx, vals, label);
  }
  if (opts.dim) ds.d = *opts.dim;
  return ds;
}

inline Dataset parse_libsvm(std::string_view text, const LibsvmOptions& opts = {}) {
  std::istringstream in{std::string(text)};
  return parse_libsvm(in, opts);
}

/// Inverse of parse_libsvm (shortest round-trip value formatting).
inline std::string to_libsvm(const Dataset& ds) {
  std::string out;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    out += ds.labels[i] > 0 ? "+1" : "-1";
    const auto idx = ds.row_indices(i);
    const auto v = ds.row_values(i);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      out += ' ';
      out += std::to_string(idx[j] + 1);
      out += ':';
      out += detail::format_double(v[j]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace memsgd
