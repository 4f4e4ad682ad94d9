#pragma once

// Discrete replicator dynamics on a regularized payoff, the KKT certificate
// of the regularized program, and support identification.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>
#include <vector>

#include <Eigen/LU>

#include "cds/graph.hpp"
#include "cds/simplex.hpp"

namespace cds {

struct ReplicatorConfig {
  double convergence_tol = 1e-10;   // max-norm of the iterate change
  Index max_iters = 100000;
  double support_threshold = 1e-7;
  // Support refinement after the dynamics stop.
  bool refine_support = true;
  double kkt_tol = 1e-6;
  double extinction_ratio = 1e-3;   // x_j < ratio * max(x) counts as nearly extinct
  Index max_refine_faces = 256;
  // Probes snap the current iterate to a nearby face; a KKT-certified snap
  // ends the run early. Probes happen after probe_interval iterations, then
  // at doubling intervals, and try at most probe_faces faces. 0 disables.
  Index probe_interval = 1000;
  Index probe_faces = 32;
  // Restarts with invading strategies re-seeded when the dynamics stall
  // near a saddle (an improving vertex decayed below the threshold).
  Index max_restarts = 16;
  double invasion_mass = 1e-3;
  bool record_trace = true;
};

// One discrete step x_i <- x_i (Wx)_i / x'Wx.
inline SimplexVector replicator_step(const RegularizedPayoff& w, const SimplexVector& x) {
  detail::require(x.size() == w.size(), "state dimension does not match payoff");
  const Vector wx = w.apply(x.values());
  Vector y = x.values().cwiseProduct(wx);
  const double denom = y.sum();
  if (!(denom > 0.0))
    throw SolverFault("replicator denominator x'Wx = " + std::to_string(denom) +
                      " is not positive (payoff shift misconfigured?)");
  y /= denom;
  return SimplexVector(std::move(y));
}

struct ReplicatorRun {
  SimplexVector x;
  Index iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // x'Wx at the start and after each step
};

inline ReplicatorRun run_replicator(const RegularizedPayoff& w, const SimplexVector& x0,
                                    const ReplicatorConfig& cfg = {}) {
  detail::require(cfg.convergence_tol > 0.0 && cfg.max_iters > 0, "invalid replicator config");
  ReplicatorRun run;
  run.x = x0;
  if (cfg.record_trace) run.trace.push_back(w.payoff(x0.values()));
  for (Index it = 1; it <= cfg.max_iters; ++it) {
    SimplexVector next = replicator_step(w, run.x);
    const double change = (next.values() - run.x.values()).cwiseAbs().maxCoeff();
    run.x = std::move(next);
    run.iterations = it;
    if (cfg.record_trace) run.trace.push_back(w.payoff(run.x.values()));
    if (change < cfg.convergence_tol) {
      run.converged = true;
      break;
    }
  }
  return run;
}

// Largest violation of the KKT system of max x'(A - alpha I_{V\S})x on the
// simplex, with lambda* = x'Ax - alpha x_S'x_S and support {x_i > threshold}.
inline double kkt_residual(const AffinityMatrix& a, const ConstraintSet& s, double alpha,
                           const SimplexVector& x, double threshold = 0.0) {
  detail::require(x.size() == a.size() && s.universe() == a.size(), "dimension mismatch");
  const Vector ax = a.matrix() * x.values();
  double pen = 0.0;
  for (Index i = 0; i < x.size(); ++i)
    if (!s.contains(i)) pen += x[i] * x[i];
  const double lambda = x.values().dot(ax) - alpha * pen;
  double r = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    if (x[i] > threshold) {
      const double v = s.contains(i) ? ax(i) - lambda : ax(i) - alpha * x[i] - lambda;
      r = std::max(r, std::abs(v));
    } else {
      r = std::max(r, ax(i) - lambda);
    }
  }
  return r;
}

inline double kkt_residual(const RegularizedPayoff& w, const SimplexVector& x, double threshold = 0.0) {
  return kkt_residual(w.base(), w.constraint(), w.alpha(), x, threshold);
}

struct LocalSolution {
  SimplexVector x;
  std::vector<Index> support;
  Index iterations = 0;
  bool converged = false;      // the dynamics met convergence_tol, or a probe certified KKT
  bool early_stop = false;     // ended by a certified probe
  double kkt = 0.0;
  bool refined = false;        // the returned point came from the refinement stage
  std::vector<double> trace;   // replicator iterates only
};

namespace detail {

// Stationary point of the payoff restricted to `face`: W_FF z = lambda 1,
// sum z = 1. Empty when the system is singular.
inline std::optional<Vector> face_stationary_point(const RegularizedPayoff& w,
                                                   const std::vector<Index>& face) {
  const Index m = face.size();
  Matrix k = Matrix::Zero(m + 1, m + 1);
  for (Index a = 0; a < m; ++a) {
    for (Index b = 0; b < m; ++b) k(a, b) = w.entry(face[a], face[b]);
    k(a, m) = -1.0;
    k(m, a) = 1.0;
  }
  Vector rhs = Vector::Zero(m + 1);
  rhs(m) = 1.0;
  Eigen::FullPivLU<Matrix> lu(k);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) return std::nullopt;
  const Vector sol = lu.solve(rhs);
  if (!sol.allFinite() || (k * sol - rhs).cwiseAbs().maxCoeff() > 1e-9) return std::nullopt;
  Vector z = Vector::Zero(w.size());
  for (Index a = 0; a < m; ++a) z(face[a]) = sol(a);
  return z;
}

inline constexpr Index settle_iters = 2000;

inline std::optional<SimplexVector> settle_on_face(const RegularizedPayoff& w, const SimplexVector& x,
                                                   const std::vector<Index>& face,
                                                   const ReplicatorConfig& cfg) {
  const double thr = cfg.support_threshold;
  if (auto z = face_stationary_point(w, face)) {
    for (Index i : face)
      if (!((*z)(i) > thr)) return std::nullopt;
    return SimplexVector::normalized(z->cwiseMax(0.0));
  }
  // Singular face system (a continuum of stationary points): let the dynamics
  // settle on the face instead, on a short budget since many faces may be tried.
  Vector y = Vector::Zero(w.size());
  for (Index i : face) y(i) = x[i];
  ReplicatorConfig inner = cfg;
  inner.record_trace = false;
  inner.max_iters = std::min<Index>(cfg.max_iters, settle_iters);
  auto run = run_replicator(w, SimplexVector::normalized(y), inner);
  SimplexVector z = run.x.truncated(thr);
  if (z.support() != face) return std::nullopt;
  return z;
}

}  // namespace detail

namespace detail {

// Support identification for a single replicator run. Candidate faces are
// tried in order (drop the nearly-extinct components, keep the full support,
// drop smallest-first prefixes); a face is accepted when its stationary point
// is strictly positive on it, does not lower the payoff and certifies KKT
// within kkt_tol.
inline void refine_support(const RegularizedPayoff& w, LocalSolution& out, const ReplicatorConfig& cfg,
                           Index max_faces) {
  std::vector<Index> order = out.support;
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return out.x[a] < out.x[b]; });
  const double top = out.x.values().maxCoeff();
  Index tiny = 0;
  while (tiny < order.size() && out.x[order[tiny]] < cfg.extinction_ratio * top) ++tiny;

  std::vector<std::vector<Index>> faces;
  auto without_prefix = [&](Index k) {
    std::vector<Index> f(order.begin() + k, order.end());
    std::sort(f.begin(), f.end());
    return f;
  };
  for (Index k = std::min<Index>(tiny, order.size() - 1); k >= 1; --k) faces.push_back(without_prefix(k));
  faces.push_back(out.support);
  if (out.kkt > cfg.kkt_tol)
    for (Index k = 1; k < order.size(); ++k) faces.push_back(without_prefix(k));

  const double base_payoff = w.payoff(out.x.values());
  const double slack = 1e-12 * std::max(1.0, std::abs(base_payoff));
  std::set<std::vector<Index>> tried;
  for (const auto& face : faces) {
    if (tried.size() >= max_faces) break;
    if (!tried.insert(face).second) continue;
    auto z = settle_on_face(w, out.x, face, cfg);
    if (!z) continue;
    const double pz = w.payoff(z->values());
    if (pz < base_payoff - slack) continue;
    const double r = kkt_residual(w, *z, cfg.support_threshold);
    if (r > cfg.kkt_tol) continue;
    out.refined = true;
    out.x = std::move(*z);
    out.support = out.x.support(cfg.support_threshold);
    out.kkt = r;
    return;
  }
}

// Moves a little mass onto the vertices outside the support of x that earn
// more than the average payoff, shrinking the step until the payoff does not
// drop. Empty when there is no such vertex.
inline std::optional<SimplexVector> reseed_invaders(const RegularizedPayoff& w, const SimplexVector& x,
                                                    const ReplicatorConfig& cfg) {
  const Vector wx = w.apply(x.values());
  const double avg = x.values().dot(wx);
  Vector dir = Vector::Zero(x.size());
  for (Index i = 0; i < x.size(); ++i)
    if (x[i] <= cfg.support_threshold && wx(i) - avg > cfg.kkt_tol) dir(i) = 1.0;
  if (dir.sum() == 0.0) return std::nullopt;
  dir /= dir.sum();
  for (double eps = cfg.invasion_mass; eps > 1e-12; eps *= 0.5) {
    SimplexVector y = SimplexVector::normalized((1.0 - eps) * x.values() + eps * dir);
    if (w.payoff(y.values()) >= avg) return y;
  }
  return std::nullopt;
}

}  // namespace detail

// Runs the dynamics from x0 and identifies the support of the limit point.
//
// Thresholding alone is unreliable at non-strict KKT points, where an
// outside vertex earns exactly lambda and its mass decays only like 1/t, so
// the limit is snapped to an exact face solution when one certifies KKT.
// Conversely, the dynamics can stop near a saddle whose improving vertex has
// decayed below the threshold; such runs are restarted with that vertex
// re-seeded. The payoff trace stays nondecreasing across restarts.
inline LocalSolution solve_from(const RegularizedPayoff& w, const SimplexVector& x0,
                                const ReplicatorConfig& cfg = {}) {
  LocalSolution out;
  SimplexVector start = x0;
  const Index chunk = cfg.probe_interval > 0 ? cfg.probe_interval : cfg.max_iters;
  // max_iters bounds the total over all restarts.
  Index budget = cfg.max_iters;
  for (Index round = 0;; ++round) {
    // One replicator run on the remaining budget, in probe-sized chunks.
    ReplicatorConfig part = cfg;
    SimplexVector x = start;
    bool converged = false;
    bool certified = false;
    Index step = chunk;
    for (bool first = true; budget > 0; first = false, step *= 2) {
      part.max_iters = std::min(step, budget);
      auto run = run_replicator(w, x, part);
      out.trace.insert(out.trace.end(), run.trace.begin() + (first || run.trace.empty() ? 0 : 1),
                       run.trace.end());
      out.iterations += run.iterations;
      budget -= run.iterations;
      x = std::move(run.x);
      if (run.converged) {
        converged = true;
        break;
      }
      if (!cfg.refine_support || budget == 0) continue;
      LocalSolution probe;
      probe.x = x.truncated(cfg.support_threshold);
      probe.support = probe.x.support();
      probe.kkt = kkt_residual(w, probe.x, cfg.support_threshold);
      detail::refine_support(w, probe, cfg, cfg.probe_faces);
      if (probe.refined && probe.kkt <= cfg.kkt_tol) {
        out.x = std::move(probe.x);
        out.support = std::move(probe.support);
        out.kkt = probe.kkt;
        out.refined = true;
        certified = true;
        break;
      }
    }
    out.converged = converged || certified;
    out.early_stop = certified;
    if (certified) break;

    out.refined = false;
    out.x = x.truncated(cfg.support_threshold);
    out.support = out.x.support();
    out.kkt = kkt_residual(w, out.x, cfg.support_threshold);
    if (cfg.refine_support) detail::refine_support(w, out, cfg, cfg.max_refine_faces);
    if (out.kkt <= cfg.kkt_tol || round >= cfg.max_restarts || budget == 0) break;

    // Continue from whichever of the raw iterate and the snapped point pays more.
    const double raw = w.payoff(x.values());
    const SimplexVector& best =
        w.payoff(out.x.values()) >= raw - 1e-12 * std::max(1.0, std::abs(raw)) ? out.x : x;
    auto next = detail::reseed_invaders(w, best, cfg);
    if (!next && !converged) next = x;
    if (!next) break;
    start = std::move(*next);
  }
  return out;
}

}  // namespace cds
