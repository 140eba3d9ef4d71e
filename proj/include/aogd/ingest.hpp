#pragma once

// libsvm text datasets: "<label> <index>:<value> ..." with 1-based,
// strictly increasing indices and optional trailing '#' comments.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "aogd/core.hpp"

namespace aogd {

struct SparseExample {
  int label = 1;  // -1 or +1
  std::vector<std::pair<std::size_t, double>> features;

  bool operator==(const SparseExample&) const = default;
};

struct Dataset {
  std::vector<SparseExample> examples;
  std::size_t d = 0;

  std::size_t size() const { return examples.size(); }
};

namespace detail {

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f'; }

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::string_view strip_comment(std::string_view s) {
  const auto pos = s.find('#');
  return pos == std::string_view::npos ? s : s.substr(0, pos);
}

inline std::string where(std::size_t line_no) {
  return line_no ? "line " + std::to_string(line_no) + ": " : std::string{};
}

inline double parse_real(std::string_view tok, std::size_t line_no) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || first == last)
    throw ParseError(where(line_no) + "malformed value '" + std::string(tok) + "'");
  if (!std::isfinite(v)) throw ParseError(where(line_no) + "non-finite value '" + std::string(tok) + "'");
  return v;
}

}  // namespace detail

/// Parses one libsvm line. Label tokens "0"/"-1" map to -1 and "1"/"+1" to +1.
/// line_no, when nonzero, is prefixed to error messages.
inline SparseExample parse_libsvm_line(std::string_view line, std::size_t line_no = 0) {
  using detail::where;
  std::string_view rest = detail::trim(detail::strip_comment(line));
  if (rest.empty()) throw ParseError(where(line_no) + "empty line");

  auto next_token = [&rest]() {
    while (!rest.empty() && detail::is_space(rest.front())) rest.remove_prefix(1);
    std::size_t n = 0;
    while (n < rest.size() && !detail::is_space(rest[n])) ++n;
    const std::string_view tok = rest.substr(0, n);
    rest.remove_prefix(n);
    return tok;
  };

  SparseExample ex;
  const std::string_view label = next_token();
  if (label == "1" || label == "+1") {
    ex.label = 1;
  } else if (label == "0" || label == "-1") {
    ex.label = -1;
  } else {
    throw ParseError(where(line_no) + "unknown label '" + std::string(label) + "'");
  }

  for (std::string_view tok = next_token(); !tok.empty(); tok = next_token()) {
    const auto colon = tok.find(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == tok.size())
      throw ParseError(where(line_no) + "malformed feature token '" + std::string(tok) + "'");
    std::size_t idx = 0;
    const auto idx_tok = tok.substr(0, colon);
    const auto [ptr, ec] = std::from_chars(idx_tok.data(), idx_tok.data() + idx_tok.size(), idx);
    if (ec != std::errc{} || ptr != idx_tok.data() + idx_tok.size() || idx == 0)
      throw ParseError(where(line_no) + "malformed feature index '" + std::string(idx_tok) + "'");
    if (!ex.features.empty() && idx <= ex.features.back().first)
      throw ParseError(where(line_no) + "feature index " + std::to_string(idx) +
                       " is not strictly increasing");
    ex.features.emplace_back(idx, detail::parse_real(tok.substr(colon + 1), line_no));
  }
  return ex;
}

/// Canonical single-space rendering; values print with round-trip precision.
inline std::string serialize_libsvm_line(const SparseExample& ex) {
  std::string out = ex.label > 0 ? "+1" : "-1";
  char buf[64];
  for (const auto& [idx, val] : ex.features) {
    std::snprintf(buf, sizeof buf, " %zu:%.17g", idx, val);
    out += buf;
  }
  return out;
}

/// Reads up to max_rows examples (0 = no limit). Blank and comment-only lines
/// are skipped. d is the largest index seen, raised to dim_hint if larger.
inline Dataset load_dataset(const std::string& path, std::size_t max_rows = 0,
                            std::size_t dim_hint = 0) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset '" + path + "'");
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  while ((max_rows == 0 || ds.examples.size() < max_rows) && std::getline(in, line)) {
    ++line_no;
    if (detail::trim(detail::strip_comment(line)).empty()) continue;
    SparseExample ex = parse_libsvm_line(line, line_no);
    if (!ex.features.empty()) ds.d = std::max(ds.d, ex.features.back().first);
    ds.examples.push_back(std::move(ex));
  }
  if (in.bad()) throw InputError("I/O error while reading '" + path + "'");
  if (ds.examples.empty()) throw InputError("dataset '" + path + "' contains no examples");
  ds.d = std::max(ds.d, dim_hint);
  return ds;
}

/// Dense n x d feature matrix (row t is u_t) and the label vector.
inline Matrix dense_features(const Dataset& ds) {
  Matrix U = Matrix::Zero(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(ds.d));
  for (std::size_t r = 0; r < ds.size(); ++r)
    for (const auto& [idx, val] : ds.examples[r].features)
      U(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(idx - 1)) = val;
  return U;
}

inline Vector labels(const Dataset& ds) {
  Vector y(static_cast<Eigen::Index>(ds.size()));
  for (std::size_t r = 0; r < ds.size(); ++r) y[static_cast<Eigen::Index>(r)] = ds.examples[r].label;
  return y;
}

}  // namespace aogd
