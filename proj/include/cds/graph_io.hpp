#pragma once

// Plain-text graph formats:
//   dense:     first line n, then n rows of n whitespace-separated numbers
//   edge list: one "i j w" per line, 0-based, undirected, no duplicates
// Lines starting with '#' are comments in both.

#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <tuple>
#include <string>
#include <utility>
#include <vector>

#include "cds/graph.hpp"

namespace cds::io {

namespace detail {

inline std::vector<std::string> content_lines(std::istream& in) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    out.push_back(line);
  }
  return out;
}

inline std::vector<double> numbers(const std::string& line, std::size_t lineno) {
  std::istringstream ss(line);
  std::vector<double> out;
  std::string tok;
  while (ss >> tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size())
      throw ParseError("line " + std::to_string(lineno) + ": not a number: '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

inline std::ifstream open(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open " + path);
  return in;
}

}  // namespace detail

inline AffinityMatrix read_dense(std::istream& in) {
  const auto lines = detail::content_lines(in);
  if (lines.empty()) throw ParseError("dense matrix: empty input");
  const auto head = detail::numbers(lines[0], 1);
  if (head.size() != 1 || head[0] < 1 || head[0] != static_cast<double>(static_cast<long>(head[0])))
    throw ParseError("dense matrix: first line must be the vertex count");
  const auto n = static_cast<Index>(head[0]);
  if (lines.size() != n + 1)
    throw ParseError("dense matrix: expected " + std::to_string(n) + " rows, got " +
                     std::to_string(lines.size() - 1));
  Matrix m(n, n);
  for (Index i = 0; i < n; ++i) {
    const auto row = detail::numbers(lines[i + 1], i + 2);
    if (row.size() != n) throw ParseError("dense matrix: row " + std::to_string(i) + " has wrong length");
    for (Index j = 0; j < n; ++j) m(i, j) = row[j];
  }
  try {
    return AffinityMatrix(std::move(m));
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("dense matrix: ") + e.what());
  }
}

// `n` = 0 infers the vertex count from the largest index.
inline AffinityMatrix read_edge_list(std::istream& in, Index n = 0) {
  const auto lines = detail::content_lines(in);
  std::vector<std::tuple<Index, Index, double>> edges;
  std::set<std::pair<Index, Index>> seen;
  Index max_index = 0;
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const auto v = detail::numbers(lines[k], k + 1);
    if (v.size() != 3) throw ParseError("edge list: expected 'i j w' on line " + std::to_string(k + 1));
    if (v[0] < 0 || v[1] < 0 || v[0] != static_cast<double>(static_cast<long>(v[0])) ||
        v[1] != static_cast<double>(static_cast<long>(v[1])))
      throw ParseError("edge list: vertex ids must be nonnegative integers");
    const auto i = static_cast<Index>(v[0]);
    const auto j = static_cast<Index>(v[1]);
    if (i == j) throw ParseError("edge list: self loop on vertex " + std::to_string(i));
    if (!(v[2] >= 0.0) || !std::isfinite(v[2])) throw ParseError("edge list: weight must be finite and >= 0");
    if (!seen.emplace(std::min(i, j), std::max(i, j)).second)
      throw ParseError("edge list: duplicate edge " + std::to_string(i) + "-" + std::to_string(j));
    edges.emplace_back(i, j, v[2]);
    max_index = std::max({max_index, i, j});
  }
  if (n == 0) {
    if (edges.empty()) throw ParseError("edge list: no edges and no vertex count");
    n = max_index + 1;
  } else if (!edges.empty() && max_index >= n) {
    throw ParseError("edge list: vertex id exceeds vertex count");
  }
  Matrix m = Matrix::Zero(n, n);
  for (const auto& [i, j, w] : edges) {
    m(i, j) = w;
    m(j, i) = w;
  }
  return AffinityMatrix(std::move(m));
}

// Dense when the first content line holds a single number, edge list otherwise.
inline AffinityMatrix read_graph(std::istream& in) {
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::istringstream probe(text);
  const auto lines = detail::content_lines(probe);
  if (lines.empty()) throw ParseError("graph: empty input");
  std::istringstream again(text);
  if (detail::numbers(lines[0], 1).size() == 1) return read_dense(again);
  return read_edge_list(again);
}

inline AffinityMatrix read_graph_file(const std::string& path) {
  auto in = detail::open(path);
  return read_graph(in);
}

inline void write_dense(std::ostream& out, const AffinityMatrix& a) {
  const auto prec = out.precision(std::numeric_limits<double>::max_digits10);
  out << a.size() << '\n';
  for (Index i = 0; i < a.size(); ++i) {
    for (Index j = 0; j < a.size(); ++j) out << (j ? " " : "") << a(i, j);
    out << '\n';
  }
  out.precision(prec);
}

// Only the nonzero upper-triangle entries.
inline void write_edge_list(std::ostream& out, const AffinityMatrix& a) {
  const auto prec = out.precision(std::numeric_limits<double>::max_digits10);
  for (Index i = 0; i < a.size(); ++i)
    for (Index j = i + 1; j < a.size(); ++j)
      if (a(i, j) != 0.0) out << i << ' ' << j << ' ' << a(i, j) << '\n';
  out.precision(prec);
}

// CSV, one row per vertex. A first row that does not parse as numbers is
// treated as a header.
inline FeatureTable read_feature_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::string spaced = line;
    for (char& c : spaced)
      if (c == ',') c = ' ';
    try {
      rows.push_back(detail::numbers(spaced, lineno));
    } catch (const ParseError&) {
      if (rows.empty() && lineno == 1) continue;
      throw;
    }
  }
  if (rows.empty()) throw ParseError("feature csv: no rows");
  try {
    return make_feature_table(rows);
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("feature csv: ") + e.what());
  }
}

inline FeatureTable read_feature_csv_file(const std::string& path) {
  auto in = detail::open(path);
  return read_feature_csv(in);
}

}  // namespace cds::io
