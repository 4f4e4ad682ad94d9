#pragma once

// Per-image segmentation metrics.

#include <algorithm>

#include "cds/graph.hpp"
#include "cds/mask.hpp"

namespace cds {

namespace detail {

struct Overlap {
  double inter = 0, out = 0, gt = 0;
};

inline Overlap overlap(const SegmentationMask& output, const SegmentationMask& gt) {
  require(output.same_shape(gt), "mask dimensions differ");
  Overlap o;
  for (std::size_t k = 0; k < gt.fg.size(); ++k) {
    o.inter += output.fg[k] & gt.fg[k];
    o.out += output.fg[k];
    o.gt += gt.fg[k];
  }
  return o;
}

}  // namespace detail

// Fraction of pixels inside `box` (clipped to the image) where output and gt disagree.
inline double error_rate(const SegmentationMask& output, const SegmentationMask& gt, const Box& box) {
  detail::require(output.same_shape(gt), "mask dimensions differ");
  const Box b{std::max(box.x0, 0), std::max(box.y0, 0), std::min(box.x1, gt.width - 1),
              std::min(box.y1, gt.height - 1)};
  detail::require(box.valid() && b.valid(), "error rate needs a non-empty box inside the image");
  double wrong = 0;
  for (int y = b.y0; y <= b.y1; ++y)
    for (int x = b.x0; x <= b.x1; ++x) wrong += output.at(x, y) != gt.at(x, y);
  return wrong / static_cast<double>(b.area());
}

// Both masks empty: 1, with a warning.
inline double jaccard(const SegmentationMask& output, const SegmentationMask& gt, Diagnostics* diag = nullptr) {
  const auto o = detail::overlap(output, gt);
  const double uni = o.out + o.gt - o.inter;
  if (uni == 0) {
    warn(diag, "jaccard: both masks empty");
    return 1.0;
  }
  return o.inter / uni;
}

inline double dsc(const SegmentationMask& output, const SegmentationMask& gt, Diagnostics* diag = nullptr) {
  const auto o = detail::overlap(output, gt);
  if (o.out + o.gt == 0) {
    warn(diag, "dsc: both masks empty");
    return 1.0;
  }
  return 2.0 * o.inter / (o.out + o.gt);
}

struct PrecisionRecall {
  double precision = 0, recall = 0, f_measure = 0;
};

inline double f_measure(double p, double r, double gamma_sq = 0.3) {
  detail::require(gamma_sq > 0, "gamma^2 must be positive");
  const double den = gamma_sq * p + r;
  return den == 0 ? 0.0 : (1.0 + gamma_sq) * p * r / den;
}

// Empty output: precision 0. Empty ground truth: recall 0.
inline PrecisionRecall prf(const SegmentationMask& output, const SegmentationMask& gt, double gamma_sq = 0.3) {
  const auto o = detail::overlap(output, gt);
  PrecisionRecall r;
  r.precision = o.out == 0 ? 0.0 : o.inter / o.out;
  r.recall = o.gt == 0 ? 0.0 : o.inter / o.gt;
  r.f_measure = f_measure(r.precision, r.recall, gamma_sq);
  return r;
}

}  // namespace cds
