#pragma once

// Interactive single-image segmentation over a superpixel graph: annotations
// become constraint sets, constrained dominant sets are peeled off, and the
// union of the extracted clusters (or its complement, for boxes) is the mask.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "cds/extract.hpp"
#include "cds/features.hpp"
#include "cds/graph.hpp"
#include "cds/mask.hpp"
#include "cds/metrics.hpp"
#include "cds/superpixel.hpp"

namespace cds {

// ---------------------------------------------------------------------------
// Annotations

struct Scribble {
  std::vector<cv::Point> fg;
  std::vector<cv::Point> bg;
};

struct LooseBox {
  Box box;
  double looseness = 0.0;  // percent increase in area
};

using Annotation = std::variant<Scribble, Box, LooseBox>;

enum class ConstraintMode { Foreground, Background };

inline const char* to_string(ConstraintMode m) { return m == ConstraintMode::Foreground ? "foreground" : "background"; }

// Grows the box on all four sides so its area becomes (1 + L/100) times the
// original: each side moves out by round(side * (sqrt(1 + L/100) - 1) / 2)
// pixels. The result is clipped to the image.
inline Box dilate_bbox(const Box& box, double looseness, int width, int height) {
  detail::require(box.valid(), "box must have x1 >= x0 and y1 >= y0");
  detail::require(looseness >= 0.0 && std::isfinite(looseness), "looseness must be >= 0");
  detail::require(width > 0 && height > 0, "image dimensions must be positive");
  const double grow = std::sqrt(1.0 + looseness / 100.0) - 1.0;
  const int dx = static_cast<int>(std::lround(box.width() * grow / 2.0));
  const int dy = static_cast<int>(std::lround(box.height() * grow / 2.0));
  return Box{std::max(0, box.x0 - dx), std::max(0, box.y0 - dy), std::min(width - 1, box.x1 + dx),
             std::min(height - 1, box.y1 + dy)};
}

// Distinct regions under the given pixels, ascending.
inline std::vector<Index> regions_hit(const SuperpixelMap& sp, const std::vector<cv::Point>& pixels) {
  std::vector<Index> out;
  for (const auto& p : pixels) {
    detail::require(p.x >= 0 && p.y >= 0 && p.x < sp.width() && p.y < sp.height(),
                    "annotation pixel (" + std::to_string(p.x) + "," + std::to_string(p.y) + ") outside the image");
    out.push_back(sp.label(p.x, p.y));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Regions under the 1-pixel perimeter of the box, after clipping to the image.
inline std::vector<Index> box_ring_regions(const SuperpixelMap& sp, const Box& box) {
  detail::require(box.valid(), "box must have x1 >= x0 and y1 >= y0");
  const Box b{std::max(box.x0, 0), std::max(box.y0, 0), std::min(box.x1, sp.width() - 1),
              std::min(box.y1, sp.height() - 1)};
  detail::require(b.valid(), "box lies entirely outside the image");
  std::vector<cv::Point> ring;
  for (int x = b.x0; x <= b.x1; ++x) {
    ring.emplace_back(x, b.y0);
    ring.emplace_back(x, b.y1);
  }
  for (int y = b.y0; y <= b.y1; ++y) {
    ring.emplace_back(b.x0, y);
    ring.emplace_back(b.x1, y);
  }
  return regions_hit(sp, ring);
}

struct AnnotationConstraints {
  ConstraintSet set;
  ConstraintMode mode = ConstraintMode::Foreground;
  std::optional<Box> box;  // the effective (dilated, clipped) box in box modes
};

inline AnnotationConstraints constraint_set_from_annotation(const SuperpixelMap& sp, const Annotation& ann) {
  const Index n = sp.region_count();
  if (const auto* s = std::get_if<Scribble>(&ann)) {
    detail::require(!s->fg.empty(), "scribble needs at least one foreground pixel");
    return {ConstraintSet(regions_hit(sp, s->fg), n), ConstraintMode::Foreground, std::nullopt};
  }
  Box box;
  if (const auto* b = std::get_if<Box>(&ann)) {
    box = *b;
  } else {
    const auto& lb = std::get<LooseBox>(ann);
    box = dilate_bbox(lb.box, lb.looseness, sp.width(), sp.height());
  }
  detail::require(box.valid() && box.x1 >= 0 && box.y1 >= 0 && box.x0 < sp.width() && box.y0 < sp.height(),
                  "box lies entirely outside the image");
  const Box clipped{std::max(box.x0, 0), std::max(box.y0, 0), std::min(box.x1, sp.width() - 1),
                    std::min(box.y1, sp.height() - 1)};
  return {ConstraintSet(box_ring_regions(sp, clipped), n), ConstraintMode::Background, clipped};
}

// ---------------------------------------------------------------------------
// Pipelines

struct SegmentConfig {
  ExtractionConfig extraction;
  // Needed only by BestSigma, which keeps the grid value scoring the best
  // Jaccard index against this mask.
  const SegmentationMask* ground_truth = nullptr;
};

struct SegmentResult {
  SegmentationMask mask;
  ExtractionResult extraction;
  std::vector<Index> constraint;          // regions in S
  ConstraintMode mode = ConstraintMode::Foreground;
  std::optional<Box> box;
  std::optional<double> sigma;            // kernel width used; empty under self-tuning
  std::vector<Index> foreground_regions;  // regions rendered as foreground
  std::vector<char> cluster_kept;         // error-tolerant mode: per extracted cluster
  bool flagged = false;                   // degenerate outcome, see diagnostics
  Diagnostics diagnostics;
};

inline AffinityMatrix region_affinity(const FeatureTable& features, const SigmaStrategy& strategy,
                                      Diagnostics* diag = nullptr) {
  return build_gaussian_affinity(normalize_min_max(features), strategy, diag);
}

namespace detail {

inline SegmentResult run_extraction(const SuperpixelMap& sp, const AffinityMatrix& a, const AnnotationConstraints& ac,
                                    const SegmentConfig& cfg) {
  SegmentResult out;
  out.constraint = ac.set.members();
  out.mode = ac.mode;
  out.box = ac.box;
  out.extraction = extract_constrained_dominant_sets(a, ac.set, cfg.extraction);
  const auto uds = out.extraction.union_support();
  if (ac.mode == ConstraintMode::Foreground) {
    out.foreground_regions = uds;
  } else {
    for (Index r = 0; r < sp.region_count(); ++r)
      if (!std::binary_search(uds.begin(), uds.end(), r)) out.foreground_regions.push_back(r);
  }
  out.mask = sp.mask_of(out.foreground_regions);
  return out;
}

template <class Run>
SegmentResult with_sigma(const FeatureTable& features, const SigmaStrategy& strategy, const SegmentConfig& cfg,
                         Run&& run) {
  if (const auto* best = std::get_if<BestSigma>(&strategy)) {
    require(cfg.ground_truth != nullptr, "best-sigma selection needs a ground-truth mask");
    require(!best->grid.empty(), "best-sigma grid is empty");
    std::optional<SegmentResult> winner;
    double best_j = -1.0;
    for (double s : best->grid) {
      auto r = run(region_affinity(features, SingleSigma{s}, nullptr));
      r.sigma = s;
      const double j = jaccard(r.mask, *cfg.ground_truth);
      if (j > best_j) {
        best_j = j;
        winner = std::move(r);
      }
    }
    return std::move(*winner);
  }
  Diagnostics diag;
  auto r = run(region_affinity(features, strategy, &diag));
  if (const auto* s = std::get_if<SingleSigma>(&strategy)) r.sigma = s->value;
  for (auto& w : diag.warnings) r.diagnostics.warn(w);
  return r;
}

}  // namespace detail

// `features` are raw region descriptors (rows = regions); they are min-max
// normalized per dimension before the kernel is applied.
inline SegmentResult segment(const SuperpixelMap& sp, const FeatureTable& features, const Annotation& ann,
                             const SigmaStrategy& strategy, const SegmentConfig& cfg = {}) {
  detail::require(static_cast<Index>(features.rows()) == sp.region_count(), "one feature row per region required");
  const auto ac = constraint_set_from_annotation(sp, ann);
  return detail::with_sigma(features, strategy, cfg,
                            [&](const AffinityMatrix& a) { return detail::run_extraction(sp, a, ac, cfg); });
}

inline SegmentResult segment(const cv::Mat& image, const SuperpixelMap& sp, const Annotation& ann,
                             const SigmaStrategy& strategy, const SegmentConfig& cfg = {},
                             bool include_texture = true) {
  return segment(sp, compute_region_features(image, sp, include_texture), ann, strategy, cfg);
}

// Scribbles that may stray into the background: extraction is constrained by
// the foreground-scribbled regions, then every cluster whose support holds a
// background-scribbled region is discarded.
inline SegmentResult segment_error_tolerant(const SuperpixelMap& sp, const FeatureTable& features,
                                            const std::vector<cv::Point>& fg, const std::vector<cv::Point>& bg,
                                            const SigmaStrategy& strategy, const SegmentConfig& cfg = {}) {
  detail::require(!fg.empty() && !bg.empty(), "error-tolerant mode needs both foreground and background scribbles");
  detail::require(static_cast<Index>(features.rows()) == sp.region_count(), "one feature row per region required");
  const auto ac = constraint_set_from_annotation(sp, Scribble{fg, {}});
  const auto bg_regions = regions_hit(sp, bg);
  return detail::with_sigma(features, strategy, cfg, [&](const AffinityMatrix& a) {
    SegmentResult r = detail::run_extraction(sp, a, ac, cfg);
    std::vector<Index> overlap;
    std::set_intersection(ac.set.begin(), ac.set.end(), bg_regions.begin(), bg_regions.end(),
                          std::back_inserter(overlap));
    if (!overlap.empty()) {
      r.flagged = true;
      r.diagnostics.warn("foreground and background scribbles share " + std::to_string(overlap.size()) + " region(s)");
    }
    r.foreground_regions.clear();
    for (const auto& c : r.extraction.clusters) {
      const bool clean = std::none_of(c.support.begin(), c.support.end(), [&](Index v) {
        return std::binary_search(bg_regions.begin(), bg_regions.end(), v);
      });
      r.cluster_kept.push_back(clean ? 1 : 0);
      if (clean) r.foreground_regions.insert(r.foreground_regions.end(), c.support.begin(), c.support.end());
    }
    std::sort(r.foreground_regions.begin(), r.foreground_regions.end());
    if (r.foreground_regions.empty()) {
      r.flagged = true;
      r.diagnostics.warn("every extracted cluster contains a background-scribbled region; mask is empty");
    }
    r.mask = sp.mask_of(r.foreground_regions);
    return r;
  });
}

// ---------------------------------------------------------------------------
// Synthetic scribbles

inline constexpr int scribble_samples = 50;

inline bool valid_error_count(int n) {
  for (int v : {0, 5, 10, 20, 30, 40, 50})
    if (n == v) return true;
  return false;
}

// Background pixels closer than fraction * diagonal to the foreground.
inline SegmentationMask error_zone(const SegmentationMask& gt, double fraction = 0.05) {
  detail::require(fraction > 0.0, "error-zone fraction must be positive");
  cv::Mat bgmask(gt.height, gt.width, CV_8U);
  for (int y = 0; y < gt.height; ++y)
    for (int x = 0; x < gt.width; ++x) bgmask.at<std::uint8_t>(y, x) = gt.at(x, y) ? 0 : 255;
  cv::Mat dist;
  cv::distanceTransform(bgmask, dist, cv::DIST_L2, cv::DIST_MASK_PRECISE);
  const double d = fraction * std::hypot(gt.width, gt.height);
  SegmentationMask zone(gt.width, gt.height);
  for (int y = 0; y < gt.height; ++y)
    for (int x = 0; x < gt.width; ++x) zone.set(x, y, !gt.at(x, y) && dist.at<float>(y, x) < d);
  return zone;
}

struct SyntheticScribbles {
  std::vector<cv::Point> fg;      // clean foreground samples followed by the error samples
  std::vector<cv::Point> bg;
  std::vector<cv::Point> errors;  // the error-zone samples (also the tail of fg)
  double error_percentage = 0.0;  // error_count relative to the 50 clean samples
};

namespace detail {

inline std::vector<cv::Point> sample_pixels(const std::vector<cv::Point>& pool, int count, std::mt19937_64& rng,
                                            const char* what, Diagnostics* diag) {
  std::vector<cv::Point> out;
  if (count == 0) return out;
  require(!pool.empty(), std::string("no candidate pixels for ") + what);
  if (pool.size() < static_cast<std::size_t>(count)) {
    cds::warn(diag, std::string("only ") + std::to_string(pool.size()) + " candidates for " + what +
                   "; sampling with replacement");
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (int k = 0; k < count; ++k) out.push_back(pool[pick(rng)]);
    return out;
  }
  std::vector<std::size_t> idx(pool.size());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
  for (int k = 0; k < count; ++k) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(k), idx.size() - 1);
    std::swap(idx[static_cast<std::size_t>(k)], idx[pick(rng)]);
    out.push_back(pool[idx[static_cast<std::size_t>(k)]]);
  }
  return out;
}

}  // namespace detail

// 50 foreground and 50 background samples drawn uniformly from the ground
// truth (background samples avoid the error zone), plus `error_count`
// error-zone samples appended to the foreground scribble.
inline SyntheticScribbles generate_synthetic_scribbles(const SegmentationMask& gt, int error_count, std::uint64_t seed,
                                                       double zone_fraction = 0.05, Diagnostics* diag = nullptr) {
  detail::require(valid_error_count(error_count), "error count must be one of 0, 5, 10, 20, 30, 40, 50");
  const auto zone = error_zone(gt, zone_fraction);
  std::vector<cv::Point> fg_pool, bg_pool, err_pool;
  for (int y = 0; y < gt.height; ++y) {
    for (int x = 0; x < gt.width; ++x) {
      if (gt.at(x, y))
        fg_pool.emplace_back(x, y);
      else if (zone.at(x, y))
        err_pool.emplace_back(x, y);
      else
        bg_pool.emplace_back(x, y);
    }
  }
  detail::require(!fg_pool.empty() && (!bg_pool.empty() || !err_pool.empty()),
                  "ground truth needs both foreground and background pixels");
  std::mt19937_64 rng(seed);
  SyntheticScribbles out;
  out.fg = detail::sample_pixels(fg_pool, scribble_samples, rng, "foreground", diag);
  out.bg = detail::sample_pixels(bg_pool, scribble_samples, rng, "background", diag);
  out.errors = detail::sample_pixels(err_pool, error_count, rng, "the error zone", diag);
  out.fg.insert(out.fg.end(), out.errors.begin(), out.errors.end());
  out.error_percentage = 100.0 * error_count / scribble_samples;
  return out;
}

}  // namespace cds
