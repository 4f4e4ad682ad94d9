#pragma once

// Combinatorial definitions of dominant sets, used to certify solver output
// on small graphs. Everything here is exponential in |S|.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_map>
#include <vector>

#include "cds/graph.hpp"
#include "cds/simplex.hpp"

namespace cds::oracle {

namespace detail {

inline std::vector<Index> sorted_unique(std::vector<Index> s, Index n) {
  std::sort(s.begin(), s.end());
  cds::detail::require(std::adjacent_find(s.begin(), s.end()) == s.end(), "vertex set has duplicates");
  cds::detail::require(s.empty() || s.back() < n, "vertex out of range");
  return s;
}

// w_T(i) for subsets T of a fixed vertex list, memoized on (mask, i).
class WeightTable {
public:
  WeightTable(const AffinityMatrix& a, std::vector<Index> verts) : a_(a), v_(std::move(verts)) {}

  Index size() const { return v_.size(); }
  Index vertex(Index local) const { return v_[local]; }

  // phi_T(i, j) = a_ij - (1/|T|) sum_{k in T} a_ik, for local i in T, j not in T.
  double phi(std::uint32_t mask, Index i, Index j) const {
    double s = 0.0;
    for (Index k = 0; k < v_.size(); ++k)
      if (mask >> k & 1u) s += a_(v_[i], v_[k]);
    return a_(v_[i], v_[j]) - s / std::popcount(mask);
  }

  double weight(std::uint32_t mask, Index i) {
    if (std::popcount(mask) == 1) return 1.0;
    const std::uint64_t key = (std::uint64_t{mask} << 5) | i;
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    const std::uint32_t rest = mask & ~(1u << i);
    double w = 0.0;
    for (Index j = 0; j < v_.size(); ++j)
      if (rest >> j & 1u) w += phi(rest, j, i) * weight(rest, j);
    memo_.emplace(key, w);
    return w;
  }

  double total(std::uint32_t mask) {
    double t = 0.0;
    for (Index i = 0; i < v_.size(); ++i)
      if (mask >> i & 1u) t += weight(mask, i);
    return t;
  }

private:
  const AffinityMatrix& a_;
  std::vector<Index> v_;
  std::unordered_map<std::uint64_t, double> memo_;
};

inline Index local_index(const std::vector<Index>& v, Index x) {
  return static_cast<Index>(std::find(v.begin(), v.end(), x) - v.begin());
}

}  // namespace detail

inline constexpr Index max_weight_set = 15;
inline constexpr Index max_dominance_set = 14;
inline constexpr Index exhaustive_premise_limit = 10;

// phi_S(i, j): relative similarity of j to i with respect to i's mean
// similarity inside S.
inline double phi(const AffinityMatrix& a, const std::vector<Index>& s, Index i, Index j) {
  const auto set = detail::sorted_unique(s, a.size());
  cds::detail::require(!set.empty(), "phi: S must be non-empty");
  cds::detail::require(std::binary_search(set.begin(), set.end(), i), "phi: i must belong to S");
  cds::detail::require(j < a.size() && !std::binary_search(set.begin(), set.end(), j),
                       "phi: j must lie outside S");
  double sum = 0.0;
  for (Index k : set) sum += a(i, k);
  return a(i, j) - sum / static_cast<double>(set.size());
}

// Recursive weight w_S(i).
inline double ds_weight(const AffinityMatrix& a, const std::vector<Index>& s, Index i) {
  const auto set = detail::sorted_unique(s, a.size());
  cds::detail::require(std::binary_search(set.begin(), set.end(), i), "ds_weight: i must belong to S");
  cds::detail::require(set.size() <= max_weight_set, "ds_weight: |S| exceeds the oracle size cap");
  detail::WeightTable table(a, set);
  const auto mask = static_cast<std::uint32_t>((1ull << set.size()) - 1);
  return table.weight(mask, detail::local_index(set, i));
}

// W(S) = sum_{i in S} w_S(i).
inline double total_weight(const AffinityMatrix& a, const std::vector<Index>& s) {
  const auto set = detail::sorted_unique(s, a.size());
  cds::detail::require(!set.empty() && set.size() <= max_weight_set, "total_weight: bad set size");
  detail::WeightTable table(a, set);
  return table.total(static_cast<std::uint32_t>((1ull << set.size()) - 1));
}

enum class Violation {
  None,
  Premise,   // W(T) <= 0 for some non-empty T subset of S
  Internal,  // w_S(i) <= 0 for some i in S
  External,  // w_{S+i}(i) >= 0 for some i outside S
};

struct DominanceWitness {
  bool dominant = false;
  Violation violation = Violation::None;
  Index vertex = 0;               // offending vertex for Internal / External
  std::vector<Index> subset;      // offending subset for Premise
  double value = 0.0;
  bool premise_exhaustive = true; // false when the premise was sampled
};

// Checks the two dominant-set conditions and the W(T) > 0 premise (all
// subsets up to |S| = 10, `premise_samples` random subsets above).
inline DominanceWitness is_dominant_set(const AffinityMatrix& a, const std::vector<Index>& s,
                                        Index premise_samples = 4096, std::uint64_t seed = 0) {
  const auto set = detail::sorted_unique(s, a.size());
  cds::detail::require(!set.empty(), "is_dominant_set: S must be non-empty");
  cds::detail::require(set.size() <= max_dominance_set, "is_dominant_set: |S| exceeds the oracle size cap");
  DominanceWitness w;
  detail::WeightTable table(a, set);
  const Index m = set.size();
  const auto full = static_cast<std::uint32_t>((1ull << m) - 1);

  auto check_premise = [&](std::uint32_t mask) {
    const double t = table.total(mask);
    if (t > 0.0) return true;
    w.violation = Violation::Premise;
    w.value = t;
    for (Index k = 0; k < m; ++k)
      if (mask >> k & 1u) w.subset.push_back(set[k]);
    return false;
  };
  if (m <= exhaustive_premise_limit) {
    for (std::uint32_t mask = 1; mask <= full; ++mask)
      if (!check_premise(mask)) return w;
  } else {
    w.premise_exhaustive = false;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint32_t> pick(1, full);
    if (!check_premise(full)) return w;
    for (Index t = 0; t < premise_samples; ++t)
      if (!check_premise(pick(rng))) return w;
  }

  for (Index k = 0; k < m; ++k) {
    const double v = table.weight(full, k);
    if (!(v > 0.0)) {
      w.violation = Violation::Internal;
      w.vertex = set[k];
      w.value = v;
      return w;
    }
  }
  for (Index i = 0; i < a.size(); ++i) {
    if (std::binary_search(set.begin(), set.end(), i)) continue;
    auto grown = set;
    grown.push_back(i);
    detail::WeightTable big(a, grown);
    const double v = big.weight(static_cast<std::uint32_t>((1ull << grown.size()) - 1), m);
    if (!(v < 0.0)) {
      w.violation = Violation::External;
      w.vertex = i;
      w.value = v;
      return w;
    }
  }
  w.dominant = true;
  return w;
}

// ---------------------------------------------------------------------------
// gamma_S = max over the face Delta_{V\S} of min_{i in S} (x'Ax - (Ax)_i) / x'x

inline double gamma_objective(const AffinityMatrix& a, const ConstraintSet& s, const Vector& x) {
  const Vector ax = a.matrix() * x;
  const double quad = x.dot(ax);
  const double norm2 = x.squaredNorm();
  double best = std::numeric_limits<double>::infinity();
  for (Index i : s) best = std::min(best, (quad - ax(i)) / norm2);
  return best;
}

// Lower bound on gamma_S by sampling the face (its vertices, a lattice when
// the face is small, Dirichlet samples) followed by a shrinking-step local
// ascent from the best points. Test-scale only.
inline double gamma_S_estimate(const AffinityMatrix& a, const ConstraintSet& s, Index samples = 2000,
                               std::uint64_t seed = 0) {
  cds::detail::require(s.universe() == a.size(), "constraint set does not match graph");
  const auto face = s.complement();
  cds::detail::require(!face.empty(), "gamma_S needs V \\ S non-empty");
  const Index n = a.size();
  const Index m = face.size();

  auto embed = [&](const std::vector<double>& w) {
    Vector x = Vector::Zero(n);
    double sum = 0.0;
    for (double v : w) sum += v;
    for (Index k = 0; k < m; ++k) x(face[k]) = w[k] / sum;
    return x;
  };

  std::vector<std::pair<double, std::vector<double>>> pool;
  auto consider = [&](std::vector<double> w) {
    pool.emplace_back(gamma_objective(a, s, embed(w)), std::move(w));
  };

  for (Index k = 0; k < m; ++k) {
    std::vector<double> w(m, 0.0);
    w[k] = 1.0;
    consider(w);
  }
  if (m == 1) return pool.front().first;

  // Lattice with resolution r (compositions of r into m parts) for small faces.
  const Index r = m <= 3 ? 12 : (m <= 5 ? 6 : 0);
  if (r > 0) {
    std::vector<Index> parts(m, 0);
    auto rec = [&](auto&& self, Index pos, Index left) -> void {
      if (pos + 1 == m) {
        parts[pos] = left;
        std::vector<double> w(parts.begin(), parts.end());
        consider(std::move(w));
        return;
      }
      for (Index v = 0; v <= left; ++v) {
        parts[pos] = v;
        self(self, pos + 1, left - v);
      }
    };
    rec(rec, 0, r);
  }

  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  for (Index t = 0; t < samples; ++t) {
    std::vector<double> w(m);
    for (double& v : w) v = expo(rng);
    consider(std::move(w));
  }

  std::sort(pool.begin(), pool.end(), [](const auto& p, const auto& q) { return p.first > q.first; });
  double best = pool.front().first;
  const Index seeds = std::min<Index>(pool.size(), 8);
  for (Index k = 0; k < seeds; ++k) {
    auto w = pool[k].second;
    double cur = pool[k].first;
    double step = 0.25;
    while (step > 1e-9) {
      bool improved = false;
      for (Index from = 0; from < m; ++from) {
        for (Index to = 0; to < m; ++to) {
          if (from == to || w[from] <= 0.0) continue;
          auto trial = w;
          const double total = std::accumulate(w.begin(), w.end(), 0.0);
          const double moved = std::min(w[from], step * total);
          trial[from] -= moved;
          trial[to] += moved;
          const double v = gamma_objective(a, s, embed(trial));
          if (v > cur) {
            cur = v;
            w = std::move(trial);
            improved = true;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
    best = std::max(best, cur);
  }
  return best;
}

}  // namespace cds::oracle
