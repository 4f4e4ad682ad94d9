#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cds/graph.hpp"

namespace cds {

// Point of the standard simplex: x >= 0, sum x = 1 (within 1e-12).
class SimplexVector {
public:
  static constexpr double sum_tolerance = 1e-12;

  SimplexVector() = default;

  explicit SimplexVector(Vector x) : x_(std::move(x)) {
    detail::require(x_.size() > 0, "simplex vector must be non-empty");
    detail::require(x_.allFinite() && x_.minCoeff() >= 0.0, "simplex vector must be nonnegative");
    detail::require(std::abs(x_.sum() - 1.0) <= sum_tolerance * std::max<double>(1.0, x_.size()),
                    "simplex vector must sum to one");
  }

  // Scales nonnegative weights onto the simplex.
  static SimplexVector normalized(Vector w) {
    detail::require(w.size() > 0 && w.allFinite() && w.minCoeff() >= 0.0,
                    "weights must be finite and nonnegative");
    const double s = w.sum();
    detail::require(s > 0.0, "weights must not all be zero");
    return SimplexVector(w / s);
  }

  static SimplexVector barycenter(Index n) {
    return SimplexVector(Vector::Constant(n, 1.0 / static_cast<double>(n)));
  }

  static SimplexVector vertex(Index n, Index i) {
    detail::require(i < n, "simplex vertex out of range");
    Vector v = Vector::Zero(n);
    v(i) = 1.0;
    return SimplexVector(std::move(v));
  }

  Index size() const { return static_cast<Index>(x_.size()); }
  double operator[](Index i) const { return x_(i); }
  const Vector& values() const { return x_; }

  std::vector<Index> support(double threshold = 0.0) const {
    std::vector<Index> out;
    for (Index i = 0; i < size(); ++i)
      if (x_(i) > threshold) out.push_back(i);
    return out;
  }

  // Components at or below `threshold` are zeroed and the rest rescaled.
  SimplexVector truncated(double threshold) const {
    Vector y = x_;
    for (Eigen::Index i = 0; i < y.size(); ++i)
      if (y(i) <= threshold) y(i) = 0.0;
    return normalized(std::move(y));
  }

  friend bool operator==(const SimplexVector& a, const SimplexVector& b) {
    return a.x_.size() == b.x_.size() && a.x_ == b.x_;
  }

private:
  Vector x_;
};

}  // namespace cds
