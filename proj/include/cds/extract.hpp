#pragma once

// Peel-off extraction of constrained dominant sets, and a multi-start
// enumerator of distinct local solutions for a single constraint set.

#include <algorithm>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cds/graph.hpp"
#include "cds/replicator.hpp"
#include "cds/simplex.hpp"

namespace cds {

struct ExtractionConfig {
  ReplicatorConfig replicator;
  std::optional<double> alpha;         // fixed alpha for every round
  std::optional<double> alpha_margin;  // otherwise lambda_max + margin
  EigenMethod eigen = EigenMethod::Auto;
};

struct Cluster {
  std::vector<Index> support;              // original vertex ids, ascending
  SimplexVector characteristic;            // over the original vertex set
  double payoff = 0.0;                     // x'Ax on the original affinity
  std::vector<Index> contains_constraints; // members of S in the support
  double alpha = 0.0;
  double lambda_max = 0.0;
  double kkt = 0.0;                        // on the round's working subgraph
  Index iterations = 0;
  bool converged = false;
  std::vector<double> trace;
};

struct ExtractionResult {
  std::vector<Cluster> clusters;
  std::vector<Index> covered_constraints;
  Index iterations_total = 0;

  // Union of all cluster supports (UDS).
  std::vector<Index> union_support() const {
    std::vector<Index> out;
    for (const auto& c : clusters) out.insert(out.end(), c.support.begin(), c.support.end());
    std::sort(out.begin(), out.end());
    return out;
  }
};

namespace detail {

inline Cluster make_cluster(const AffinityMatrix& a, const ConstraintSet& s,
                            const std::vector<Index>& to_original, const LocalSolution& sol,
                            double alpha, double lambda) {
  Cluster c;
  Vector x = Vector::Zero(a.size());
  for (Index k = 0; k < to_original.size(); ++k) x(to_original[k]) = sol.x[k];
  c.characteristic = SimplexVector::normalized(std::move(x));
  for (Index k : sol.support) c.support.push_back(to_original[k]);
  std::sort(c.support.begin(), c.support.end());
  for (Index v : c.support)
    if (s.contains(v)) c.contains_constraints.push_back(v);
  const Vector& cx = c.characteristic.values();
  c.payoff = cx.dot(a.matrix() * cx);
  c.alpha = alpha;
  c.lambda_max = lambda;
  c.kkt = sol.kkt;
  c.iterations = sol.iterations;
  c.converged = sol.converged;
  c.trace = sol.trace;
  return c;
}

inline std::string join(const std::vector<Index>& v) {
  std::string s;
  for (Index i : v) s += (s.empty() ? "" : ",") + std::to_string(i);
  return "{" + s + "}";
}

}  // namespace detail

// Repeatedly solves the regularized program from the barycenter of the
// working graph, records the cluster, and deletes its support (constraint
// members included) until every member of S has been extracted or the
// working graph is empty. alpha is recomputed each round on the current
// subgraph and the constraint members still pending.
inline ExtractionResult extract_constrained_dominant_sets(const AffinityMatrix& a, const ConstraintSet& s,
                                                          const ExtractionConfig& cfg = {}) {
  detail::require(s.universe() == a.size(), "constraint set does not match graph");
  ExtractionResult out;
  std::vector<Index> working(a.size());
  for (Index i = 0; i < a.size(); ++i) working[i] = i;
  std::vector<Index> pending = s.members();

  while (!pending.empty() && !working.empty()) {
    const AffinityMatrix sub = a.principal(working);
    std::vector<Index> local_s;
    for (Index k = 0; k < working.size(); ++k)
      if (std::binary_search(pending.begin(), pending.end(), working[k])) local_s.push_back(k);
    const ConstraintSet ls(local_s, working.size());

    const double lambda = lambda_max_principal_submatrix(sub, ls, cfg.eigen);
    double alpha = 0.0;
    if (cfg.alpha) {
      alpha = *cfg.alpha;
    } else {
      const double margin = cfg.alpha_margin.value_or(default_alpha_margin(lambda));
      detail::require(margin > 0.0, "alpha margin must be positive");
      alpha = lambda + margin;
    }
    const auto w = regularize(sub, ls, alpha);
    const auto sol = solve_from(w, SimplexVector::barycenter(working.size()), cfg.replicator);
    Cluster c = detail::make_cluster(a, s, working, sol, alpha, lambda);
    out.iterations_total += sol.iterations;

    std::vector<Index> hit;
    std::set_intersection(c.support.begin(), c.support.end(), pending.begin(), pending.end(),
                          std::back_inserter(hit));
    if (hit.empty())
      throw SolverFault("extracted support " + detail::join(c.support) +
                        " misses the remaining constraints " + detail::join(pending) +
                        " (alpha = " + std::to_string(alpha) + ", lambda_max = " + std::to_string(lambda) +
                        ")");

    std::vector<Index> keep;
    std::set_difference(working.begin(), working.end(), c.support.begin(), c.support.end(),
                        std::back_inserter(keep));
    working = std::move(keep);
    std::vector<Index> left;
    std::set_difference(pending.begin(), pending.end(), hit.begin(), hit.end(), std::back_inserter(left));
    pending = std::move(left);
    out.covered_constraints.insert(out.covered_constraints.end(), hit.begin(), hit.end());
    out.clusters.push_back(std::move(c));
  }
  std::sort(out.covered_constraints.begin(), out.covered_constraints.end());
  return out;
}

// Start points for the multi-start mode: the barycenter followed by states
// concentrated on random faces (unit mass on a random vertex subset, a small
// random floor elsewhere). Deterministic in `seed`.
inline std::vector<SimplexVector> multi_start_points(Index n, Index count, std::uint64_t seed) {
  detail::require(n > 0, "multi-start needs a non-empty graph");
  std::vector<SimplexVector> out;
  if (count == 0) return out;
  out.push_back(SimplexVector::barycenter(n));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> floor(1.0, 2.0);
  std::uniform_int_distribution<Index> size(1, n);
  std::vector<Index> order(n);
  for (Index i = 0; i < n; ++i) order[i] = i;
  while (out.size() < count) {
    std::shuffle(order.begin(), order.end(), rng);
    const Index m = size(rng);
    Vector x(n);
    for (Index i = 0; i < n; ++i) x(i) = 1e-3 * floor(rng);
    for (Index k = 0; k < m; ++k) x(order[k]) += 1.0;
    out.push_back(SimplexVector::normalized(std::move(x)));
  }
  return out;
}

// Distinct local solutions of the regularized program on the full graph,
// one per distinct support, ordered by support.
inline std::vector<Cluster> enumerate_local_solutions(const AffinityMatrix& a, const ConstraintSet& s,
                                                      Index starts, std::uint64_t seed = 0,
                                                      const ExtractionConfig& cfg = {}) {
  detail::require(s.universe() == a.size(), "constraint set does not match graph");
  const double lambda = lambda_max_principal_submatrix(a, s, cfg.eigen);
  const double alpha = cfg.alpha ? *cfg.alpha : lambda + cfg.alpha_margin.value_or(default_alpha_margin(lambda));
  detail::require(alpha > 0.0, "alpha must be positive");
  const auto w = regularize(a, s, alpha);
  std::vector<Index> identity(a.size());
  for (Index i = 0; i < a.size(); ++i) identity[i] = i;

  std::map<std::vector<Index>, Cluster> found;
  for (const auto& x0 : multi_start_points(a.size(), starts, seed)) {
    const auto sol = solve_from(w, x0, cfg.replicator);
    Cluster c = detail::make_cluster(a, s, identity, sol, alpha, lambda);
    found.try_emplace(c.support, std::move(c));
  }
  std::vector<Cluster> out;
  for (auto& [key, c] : found) out.push_back(std::move(c));
  return out;
}

}  // namespace cds
