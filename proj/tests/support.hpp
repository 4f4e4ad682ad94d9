#pragma once

// Shared fixtures and independent oracles for the test suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cds/graph.hpp"

namespace testing_support {

using cds::AffinityMatrix;
using cds::Index;
using cds::Matrix;

// The 8-vertex unweighted toy graph, vertices labelled 1..8 (index = label - 1).
inline const std::vector<std::pair<int, int>>& toy_edges() {
  static const std::vector<std::pair<int, int>> e{{1, 2}, {2, 3}, {3, 6}, {4, 5}, {5, 6},
                                                  {5, 7}, {5, 8}, {6, 7}, {6, 8}, {7, 8}};
  return e;
}

inline AffinityMatrix toy_graph() {
  Matrix m = Matrix::Zero(8, 8);
  for (auto [i, j] : toy_edges()) m(i - 1, j - 1) = m(j - 1, i - 1) = 1.0;
  return AffinityMatrix(m);
}

// 1-based labels to sorted 0-based indices.
inline std::vector<Index> ids(std::initializer_list<int> labels) {
  std::vector<Index> out;
  for (int l : labels) out.push_back(static_cast<Index>(l - 1));
  std::sort(out.begin(), out.end());
  return out;
}

inline AffinityMatrix random_weighted(Index n, std::mt19937_64& rng, double density = 0.6) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (u(rng) < density) m(i, j) = m(j, i) = u(rng);
  return AffinityMatrix(m);
}

inline AffinityMatrix random_unweighted(Index n, std::mt19937_64& rng, double density = 0.5) {
  std::bernoulli_distribution b(density);
  Matrix m = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (b(rng)) m(i, j) = m(j, i) = 1.0;
  return AffinityMatrix(m);
}

inline std::vector<Index> random_subset(Index n, std::mt19937_64& rng) {
  std::vector<Index> out;
  std::bernoulli_distribution b(0.35);
  for (Index i = 0; i < n; ++i)
    if (b(rng)) out.push_back(i);
  if (out.empty()) out.push_back(std::uniform_int_distribution<Index>(0, n - 1)(rng));
  return out;
}

// Cyclic Jacobi rotations; returns all eigenvalues of a symmetric matrix.
inline std::vector<double> jacobi_eigenvalues(Matrix a) {
  const Index n = a.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> out(n);
  for (Index i = 0; i < n; ++i) out[i] = a(i, i);
  std::sort(out.begin(), out.end());
  return out;
}

inline double jacobi_lambda_max(const Matrix& a) {
  if (a.rows() == 0) return 0.0;
  return jacobi_eigenvalues(a).back();
}

// Plain recursion for w_S(i), no memoization. `s` holds vertex ids.
inline double naive_weight(const AffinityMatrix& a, std::vector<Index> s, Index i) {
  if (s.size() == 1) return 1.0;
  std::vector<Index> rest;
  for (Index v : s)
    if (v != i) rest.push_back(v);
  double total = 0.0;
  for (Index j : rest) {
    double mean = 0.0;
    for (Index k : rest) mean += a(j, k);
    mean /= static_cast<double>(rest.size());
    total += (a(j, i) - mean) * naive_weight(a, rest, j);
  }
  return total;
}

// Bron-Kerbosch with pivoting over the vertex list `verts`, edges where a > 0.
inline std::vector<std::set<Index>> maximal_cliques(const AffinityMatrix& a, const std::vector<Index>& verts) {
  std::vector<std::set<Index>> out;
  std::function<void(std::set<Index>, std::set<Index>, std::set<Index>)> bk =
      [&](std::set<Index> r, std::set<Index> p, std::set<Index> x) {
        if (p.empty() && x.empty()) {
          if (!r.empty()) out.push_back(r);
          return;
        }
        Index pivot = p.empty() ? *x.begin() : *p.begin();
        std::vector<Index> cand;
        for (Index v : p)
          if (a(pivot, v) == 0.0 || v == pivot) cand.push_back(v);
        for (Index v : cand) {
          std::set<Index> np, nx;
          for (Index u : p)
            if (u != v && a(u, v) > 0.0) np.insert(u);
          for (Index u : x)
            if (a(u, v) > 0.0) nx.insert(u);
          auto nr = r;
          nr.insert(v);
          bk(nr, np, nx);
          p.erase(v);
          x.insert(v);
        }
      };
  bk({}, std::set<Index>(verts.begin(), verts.end()), {});
  return out;
}

// A support is predicted by the clique picture when it is exactly the union
// of the maximal cliques of the working graph that lie inside it and contain
// a maximal clique of the graph induced by the pending constraints.
inline bool clique_union_prediction_holds(const AffinityMatrix& a, const std::vector<Index>& working,
                                          const std::vector<Index>& pending,
                                          const std::vector<Index>& support) {
  const auto big = maximal_cliques(a, working);
  const auto small = maximal_cliques(a, pending);
  const std::set<Index> sup(support.begin(), support.end());
  std::set<Index> covered;
  for (const auto& c : big) {
    if (!std::includes(sup.begin(), sup.end(), c.begin(), c.end())) continue;
    const bool anchored = std::any_of(small.begin(), small.end(), [&](const std::set<Index>& k) {
      return std::includes(c.begin(), c.end(), k.begin(), k.end());
    });
    if (anchored) covered.insert(c.begin(), c.end());
  }
  return !covered.empty() && covered == sup;
}

// Scratch directory removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("cds-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
  std::filesystem::path path_;
};

}  // namespace testing_support
