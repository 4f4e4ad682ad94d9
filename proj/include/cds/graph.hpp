#pragma once

// Graph core: affinity matrices, constraint sets, Gaussian affinities,
// spectral bounds and the regularized payoff used by the solver.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "cds/error.hpp"

namespace cds {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = std::size_t;

// Collects non-fatal conditions (floored sigmas, flagged degenerate inputs...).
struct Diagnostics {
  std::vector<std::string> warnings;

  void warn(std::string msg) { warnings.push_back(std::move(msg)); }
  bool empty() const { return warnings.empty(); }
};

inline void warn(Diagnostics* diag, std::string msg) {
  if (diag) diag->warn(std::move(msg));
}

// n x n nonnegative symmetric matrix with zero diagonal. Immutable.
class AffinityMatrix {
public:
  AffinityMatrix() = default;

  // Validates the invariants bit-exactly; throws InvalidArgument otherwise.
  explicit AffinityMatrix(Matrix m) : m_(std::move(m)) {
    detail::require(m_.rows() == m_.cols(), "affinity matrix must be square");
    const auto n = m_.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
      detail::require(m_(i, i) == 0.0, "affinity matrix diagonal must be zero (row " +
                                           std::to_string(i) + ")");
      for (Eigen::Index j = 0; j < n; ++j) {
        const double v = m_(i, j);
        detail::require(std::isfinite(v) && v >= 0.0,
                        "affinity entries must be finite and nonnegative");
        detail::require(v == m_(j, i), "affinity matrix must be symmetric");
      }
    }
  }

  // Mirrors the upper triangle and clears the diagonal before validating.
  static AffinityMatrix from_upper(Matrix m) {
    detail::require(m.rows() == m.cols(), "affinity matrix must be square");
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      m(i, i) = 0.0;
      for (Eigen::Index j = i + 1; j < m.cols(); ++j) m(j, i) = m(i, j);
    }
    return AffinityMatrix(std::move(m));
  }

  static AffinityMatrix zeros(Index n) { return AffinityMatrix(Matrix::Zero(n, n)); }

  Index size() const { return static_cast<Index>(m_.rows()); }
  double operator()(Index i, Index j) const { return m_(i, j); }
  const Matrix& matrix() const { return m_; }

  // Principal submatrix indexed by `idx` (in the given order).
  AffinityMatrix principal(std::span<const Index> idx) const {
    Matrix sub(idx.size(), idx.size());
    for (Index a = 0; a < idx.size(); ++a)
      for (Index b = 0; b < idx.size(); ++b) sub(a, b) = m_(idx[a], idx[b]);
    return AffinityMatrix(std::move(sub));
  }

  friend bool operator==(const AffinityMatrix& a, const AffinityMatrix& b) {
    return a.m_.rows() == b.m_.rows() && a.m_ == b.m_;
  }

private:
  Matrix m_;
};

// Sorted, duplicate-free, non-empty set of vertex indices below n.
class ConstraintSet {
public:
  ConstraintSet() = default;

  ConstraintSet(std::vector<Index> members, Index n) : members_(std::move(members)), n_(n) {
    detail::require(!members_.empty(), "constraint set must be non-empty");
    std::sort(members_.begin(), members_.end());
    detail::require(std::adjacent_find(members_.begin(), members_.end()) == members_.end(),
                    "constraint set has duplicate vertices");
    detail::require(members_.back() < n, "constraint vertex out of range");
    mask_.assign(n, 0);
    for (Index v : members_) mask_[v] = 1;
  }

  static ConstraintSet all(Index n) {
    std::vector<Index> v(n);
    std::iota(v.begin(), v.end(), Index{0});
    return ConstraintSet(std::move(v), n);
  }

  bool contains(Index v) const { return v < mask_.size() && mask_[v]; }
  Index size() const { return members_.size(); }
  Index universe() const { return n_; }
  const std::vector<Index>& members() const { return members_; }
  auto begin() const { return members_.begin(); }
  auto end() const { return members_.end(); }

  // V \ S in increasing order.
  std::vector<Index> complement() const {
    std::vector<Index> out;
    for (Index v = 0; v < n_; ++v)
      if (!mask_[v]) out.push_back(v);
    return out;
  }

  friend bool operator==(const ConstraintSet& a, const ConstraintSet& b) {
    return a.n_ == b.n_ && a.members_ == b.members_;
  }

private:
  std::vector<Index> members_;
  std::vector<char> mask_;
  Index n_ = 0;
};

// ---------------------------------------------------------------------------
// Gaussian affinities

// Fixed kernel width.
struct SingleSigma {
  double value = 0.1;
};

// Per-instance choice from a grid; resolved by the pipelines against ground
// truth, so the affinity builder itself needs a concrete value.
struct BestSigma {
  std::vector<double> grid{0.05, 0.075, 0.1, 0.125, 0.15, 0.175, 0.2};
};

// sigma_i = mean distance to the K nearest neighbours of f_i.
struct SelfTuning {
  Index k = 7;
  double floor = 1e-12;
};

using SigmaStrategy = std::variant<SingleSigma, BestSigma, SelfTuning>;

// Rows are vertices.
using FeatureTable = Matrix;

inline FeatureTable make_feature_table(const std::vector<std::vector<double>>& rows) {
  detail::require(!rows.empty(), "feature table is empty");
  const Index d = rows.front().size();
  FeatureTable f(rows.size(), d);
  for (Index i = 0; i < rows.size(); ++i) {
    detail::require(rows[i].size() == d, "feature dimension mismatch at row " + std::to_string(i));
    for (Index k = 0; k < d; ++k) f(i, k) = rows[i][k];
  }
  return f;
}

namespace detail {

inline void check_features(const FeatureTable& f) {
  require(f.rows() >= 2, "need at least two feature vectors");
  require(f.allFinite(), "feature values must be finite");
}

inline Matrix pairwise_sq_distances(const FeatureTable& f) {
  const auto n = f.rows();
  Matrix d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (f.row(i) - f.row(j)).squaredNorm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

}  // namespace detail

struct SigmaEstimate {
  std::vector<double> sigmas;
  bool degenerate = false;  // some sigma_i is exactly zero
};

inline SigmaEstimate self_tuning_sigmas(const FeatureTable& features, Index k) {
  detail::check_features(features);
  const Index n = features.rows();
  detail::require(k >= 1 && k < n, "self-tuning K must satisfy 1 <= K < n");
  const Matrix d2 = detail::pairwise_sq_distances(features);
  SigmaEstimate out;
  out.sigmas.resize(n);
  std::vector<double> dist;
  dist.reserve(n - 1);
  for (Index i = 0; i < n; ++i) {
    dist.clear();
    for (Index j = 0; j < n; ++j)
      if (j != i) dist.push_back(std::sqrt(d2(i, j)));
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
    std::sort(dist.begin(), dist.begin() + k);
    double s = 0.0;
    for (Index t = 0; t < k; ++t) s += dist[t];
    out.sigmas[i] = s / static_cast<double>(k);
    if (out.sigmas[i] <= 0.0) out.degenerate = true;
  }
  return out;
}

inline AffinityMatrix build_gaussian_affinity(const FeatureTable& features, double sigma) {
  detail::check_features(features);
  detail::require(sigma > 0.0 && std::isfinite(sigma), "sigma must be positive");
  const Matrix d2 = detail::pairwise_sq_distances(features);
  const double denom = 2.0 * sigma * sigma;
  Matrix a = Matrix::Zero(d2.rows(), d2.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = i + 1; j < a.cols(); ++j) a(i, j) = std::exp(-d2(i, j) / denom);
  return AffinityMatrix::from_upper(std::move(a));
}

inline AffinityMatrix build_gaussian_affinity(const FeatureTable& features,
                                              const SigmaStrategy& strategy,
                                              Diagnostics* diag = nullptr) {
  if (const auto* s = std::get_if<SingleSigma>(&strategy))
    return build_gaussian_affinity(features, s->value);
  if (std::holds_alternative<BestSigma>(strategy))
    throw InvalidArgument("best-sigma needs a resolved sigma; build one affinity per grid value");

  const auto& st = std::get<SelfTuning>(strategy);
  detail::require(st.floor > 0.0, "self-tuning floor must be positive");
  auto est = self_tuning_sigmas(features, st.k);
  if (est.degenerate)
    warn(diag, "self-tuning: duplicate-point neighbourhoods, sigma floored at " +
                   std::to_string(st.floor));
  for (double& s : est.sigmas) s = std::max(s, st.floor);
  const Matrix d2 = detail::pairwise_sq_distances(features);
  Matrix a = Matrix::Zero(d2.rows(), d2.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = i + 1; j < a.cols(); ++j)
      a(i, j) = std::exp(-d2(i, j) / (est.sigmas[i] * est.sigmas[j]));
  return AffinityMatrix::from_upper(std::move(a));
}

// ---------------------------------------------------------------------------
// Spectral bound

enum class EigenMethod { Auto, Power, Dense };

struct Eigenpair {
  double value = 0.0;
  Vector vector;
  Index iterations = 0;
  bool dense = false;  // computed (or finished) by the dense solver
};

struct PowerIterationOptions {
  double rayleigh_tol = 1e-10;
  double residual_tol = 1e-8;  // relative to max(1, value)
  Index max_iters = 10000;
  Index dense_below = 64;      // Auto: dimensions up to this go straight to dense
};

namespace detail {

inline Eigenpair dense_largest(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  if (es.info() != Eigen::Success) throw SolverFault("dense eigendecomposition failed");
  Eigenpair out;
  out.value = es.eigenvalues()(m.rows() - 1);
  out.vector = es.eigenvectors().col(m.rows() - 1);
  out.dense = true;
  return out;
}

}  // namespace detail

// Largest eigenvalue of a symmetric nonnegative matrix. The power method runs
// on M + cI with c = max row sum, which makes every eigenvalue nonnegative so
// the top of the spectrum dominates even for bipartite patterns.
inline Eigenpair largest_eigenpair(const Matrix& m, EigenMethod method = EigenMethod::Auto,
                                   const PowerIterationOptions& opt = {}) {
  const Index n = m.rows();
  detail::require(n > 0 && m.cols() == m.rows(), "eigenproblem needs a square non-empty matrix");
  if (method == EigenMethod::Dense || (method == EigenMethod::Auto && n <= opt.dense_below))
    return detail::dense_largest(m);

  const double c = m.cwiseAbs().rowwise().sum().maxCoeff();
  Vector v = Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  double rq = v.dot(m * v);
  for (Index it = 1; it <= opt.max_iters; ++it) {
    Vector w = m * v + c * v;
    const double norm = w.norm();
    if (norm == 0.0) break;
    v = w / norm;
    const Vector mv = m * v;
    const double next = v.dot(mv);
    const double residual = (mv - next * v).cwiseAbs().maxCoeff();
    const bool settled = std::abs(next - rq) <= opt.rayleigh_tol * std::max(1.0, std::abs(next));
    rq = next;
    if (settled && residual <= opt.residual_tol * std::max(1.0, std::abs(rq))) {
      Eigenpair out;
      out.value = rq;
      out.vector = v;
      out.iterations = it;
      return out;
    }
  }
  auto out = detail::dense_largest(m);
  out.iterations = opt.max_iters;
  return out;
}

// lambda_max(A_{V\S}); 0 when S = V.
inline double lambda_max_principal_submatrix(const AffinityMatrix& a, const ConstraintSet& s,
                                             EigenMethod method = EigenMethod::Auto) {
  detail::require(s.universe() == a.size(), "constraint set does not match graph size");
  const auto rest = s.complement();
  if (rest.empty()) return 0.0;
  if (rest.size() == 1) return 0.0;
  return largest_eigenpair(a.principal(rest).matrix(), method).value;
}

inline double default_alpha_margin(double lambda_max) {
  return 1e-4 * std::max(1.0, lambda_max);
}

inline double choose_alpha(const AffinityMatrix& a, const ConstraintSet& s,
                           std::optional<double> margin = std::nullopt,
                           EigenMethod method = EigenMethod::Auto) {
  const double lambda = lambda_max_principal_submatrix(a, s, method);
  const double m = margin.value_or(default_alpha_margin(lambda));
  detail::require(m > 0.0, "alpha margin must be positive");
  return lambda + m;
}

// ---------------------------------------------------------------------------
// Regularized payoff

// W = A - alpha * I_{V\S} + shift * J. Evaluated implicitly; `matrix()`
// materializes it for inspection.
class RegularizedPayoff {
public:
  RegularizedPayoff(AffinityMatrix base, ConstraintSet constraint, double alpha, double shift)
      : base_(std::move(base)), constraint_(std::move(constraint)), alpha_(alpha), shift_(shift) {
    detail::require(constraint_.universe() == base_.size(), "constraint set does not match graph");
    detail::require(alpha_ > 0.0, "alpha must be positive");
    detail::require(shift_ >= alpha_, "shift must be at least alpha");
  }

  Index size() const { return base_.size(); }
  const AffinityMatrix& base() const { return base_; }
  const ConstraintSet& constraint() const { return constraint_; }
  double alpha() const { return alpha_; }
  double shift() const { return shift_; }

  double entry(Index i, Index j) const {
    if (i != j) return base_(i, j) + shift_;
    return constraint_.contains(i) ? shift_ : shift_ - alpha_;
  }

  Matrix matrix() const {
    const Index n = size();
    Matrix w(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) w(i, j) = entry(i, j);
    return w;
  }

  // (W x)_i
  Vector apply(const Vector& x) const {
    const double total = x.sum();
    Vector out = base_.matrix() * x;
    for (Index i = 0; i < size(); ++i) {
      out(i) += shift_ * total;
      if (!constraint_.contains(i)) out(i) -= alpha_ * x(i);
    }
    return out;
  }

  // x'Wx
  double payoff(const Vector& x) const { return x.dot(apply(x)); }

  // f_S^alpha(x) = x'Ax - alpha x_S'x_S, without the shift.
  double objective(const Vector& x) const {
    double pen = 0.0;
    for (Index i = 0; i < size(); ++i)
      if (!constraint_.contains(i)) pen += x(i) * x(i);
    return x.dot(base_.matrix() * x) - alpha_ * pen;
  }

private:
  AffinityMatrix base_;
  ConstraintSet constraint_;
  double alpha_;
  double shift_;
};

inline RegularizedPayoff regularize(const AffinityMatrix& a, const ConstraintSet& s, double alpha) {
  return RegularizedPayoff(a, s, alpha, alpha);
}

}  // namespace cds
