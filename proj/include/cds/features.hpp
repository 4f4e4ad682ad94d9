#pragma once

// Region descriptors: colour medians in RGB, HSV and CIE L*a*b* plus mean
// responses of the 48-filter Leung-Malik bank.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "cds/graph.hpp"
#include "cds/superpixel.hpp"

namespace cds {

inline constexpr Index color_dims = 9;
inline constexpr Index texture_dims = 48;

namespace detail {

inline double median_of(std::vector<float>& v) {
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

// Zero mean, unit L1 norm.
inline cv::Mat normalise_filter(cv::Mat f) {
  f -= cv::mean(f)[0];
  const double l1 = cv::norm(f, cv::NORM_L1);
  if (l1 > 0) f /= l1;
  return f;
}

inline double gauss1d(double sigma, double x, int order) {
  const double var = sigma * sigma;
  const double g = std::exp(-x * x / (2 * var)) / std::sqrt(std::numbers::pi * 2 * var);
  if (order == 1) return -g * x / var;
  if (order == 2) return g * (x * x - var) / (var * var);
  return g;
}

constexpr int lm_support = 49;

// Oriented derivative-of-Gaussian filter, elongated 3:1 along its axis.
inline cv::Mat lm_edge_bar(double scale, double angle, int order) {
  const int h = (lm_support - 1) / 2;
  cv::Mat f(lm_support, lm_support, CV_64F);
  const double c = std::cos(angle), s = std::sin(angle);
  for (int r = 0; r < lm_support; ++r) {
    for (int col = 0; col < lm_support; ++col) {
      const double x = col - h, y = h - r;
      const double rx = c * x - s * y, ry = s * x + c * y;
      f.at<double>(r, col) = gauss1d(3 * scale, rx, 0) * gauss1d(scale, ry, order);
    }
  }
  return normalise_filter(f);
}

inline cv::Mat lm_gaussian(double sigma) {
  const int h = (lm_support - 1) / 2;
  cv::Mat f(lm_support, lm_support, CV_64F);
  for (int r = 0; r < lm_support; ++r)
    for (int c = 0; c < lm_support; ++c)
      f.at<double>(r, c) = std::exp(-((r - h) * (r - h) + (c - h) * (c - h)) / (2 * sigma * sigma));
  return f / cv::sum(f)[0];
}

inline cv::Mat lm_log(double sigma) {
  const int h = (lm_support - 1) / 2;
  const cv::Mat g = lm_gaussian(sigma);
  cv::Mat f(lm_support, lm_support, CV_64F);
  const double s2 = sigma * sigma;
  for (int r = 0; r < lm_support; ++r) {
    for (int c = 0; c < lm_support; ++c) {
      const double d2 = (r - h) * (r - h) + (c - h) * (c - h);
      f.at<double>(r, c) = g.at<double>(r, c) * (d2 - 2 * s2) / (s2 * s2);
    }
  }
  return normalise_filter(f);
}

}  // namespace detail

// The 48 filters in order: first-derivative bars (3 scales x 6 orientations),
// second-derivative bars (same), 8 Laplacians of Gaussian, 4 Gaussians.
inline const std::vector<cv::Mat>& lm_filter_bank() {
  static const std::vector<cv::Mat> bank = [] {
    std::vector<cv::Mat> out;
    const double sq2 = std::sqrt(2.0);
    const double scales[3] = {sq2, 2.0, 2.0 * sq2};
    for (int order : {1, 2})
      for (double sc : scales)
        for (int o = 0; o < 6; ++o) out.push_back(detail::lm_edge_bar(sc, std::numbers::pi * o / 6.0, order));
    const double base[4] = {sq2, 2.0, 2.0 * sq2, 4.0};
    for (double s : base) out.push_back(detail::lm_log(s));
    for (double s : base) out.push_back(detail::lm_log(3 * s));
    for (double s : base) out.push_back(detail::lm_gaussian(s));
    return out;
  }();
  return bank;
}

// Per-region colour medians (R, G, B in [0,1]; H in degrees, S, V in [0,1];
// L*, a*, b* for sRGB under D65) and, when enabled, per-region mean
// responses of the filter bank on the grey-level image. Rows are regions.
// `image` is 8-bit BGR.
inline FeatureTable compute_region_features(const cv::Mat& image, const SuperpixelMap& sp, bool include_texture) {
  detail::require(!image.empty() && image.type() == CV_8UC3, "image must be 8-bit, 3 channels");
  detail::require(image.cols == sp.width() && image.rows == sp.height(), "image and superpixel map differ in size");
  cv::Mat bgr;
  image.convertTo(bgr, CV_32FC3, 1.0 / 255.0);
  cv::Mat rgb, hsv, lab;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  cv::cvtColor(bgr, hsv, cv::COLOR_BGR2HSV);
  cv::cvtColor(bgr, lab, cv::COLOR_BGR2Lab);
  const cv::Mat* spaces[3] = {&rgb, &hsv, &lab};

  const Index n = sp.region_count();
  const Index dims = color_dims + (include_texture ? texture_dims : 0);
  FeatureTable f(n, dims);
  std::vector<float> vals;
  for (Index r = 0; r < n; ++r) {
    const auto& px = sp.pixels(r);
    for (int s = 0; s < 3; ++s) {
      const auto* data = spaces[s]->ptr<cv::Vec3f>(0);
      for (int ch = 0; ch < 3; ++ch) {
        vals.clear();
        for (auto p : px) vals.push_back(data[p][ch]);
        f(r, s * 3 + ch) = detail::median_of(vals);
      }
    }
  }
  if (include_texture) {
    cv::Mat grey;
    cv::cvtColor(bgr, grey, cv::COLOR_BGR2GRAY);
    grey.convertTo(grey, CV_64F);
    const auto& bank = lm_filter_bank();
    cv::Mat resp;
    for (Index k = 0; k < bank.size(); ++k) {
      cv::filter2D(grey, resp, CV_64F, bank[k], cv::Point(-1, -1), 0.0, cv::BORDER_REFLECT);
      const auto* data = resp.ptr<double>(0);
      for (Index r = 0; r < n; ++r) {
        double sum = 0;
        for (auto p : sp.pixels(r)) sum += data[p];
        f(r, color_dims + k) = sum / static_cast<double>(sp.area(r));
      }
    }
  }
  return f;
}

// Each column rescaled to [0,1] over the rows; constant columns become 0.
inline FeatureTable normalize_min_max(const FeatureTable& f) {
  FeatureTable out = f;
  for (Eigen::Index c = 0; c < f.cols(); ++c) {
    const double lo = f.col(c).minCoeff(), hi = f.col(c).maxCoeff();
    if (hi > lo)
      out.col(c) = (f.col(c).array() - lo) / (hi - lo);
    else
      out.col(c).setZero();
  }
  return out;
}

// Mean BGR colour per region in [0,1], rows are regions.
inline FeatureTable region_mean_colors(const cv::Mat& image, const SuperpixelMap& sp) {
  detail::require(!image.empty() && image.type() == CV_8UC3, "image must be 8-bit, 3 channels");
  detail::require(image.cols == sp.width() && image.rows == sp.height(), "image and superpixel map differ in size");
  FeatureTable out = FeatureTable::Zero(sp.region_count(), 3);
  const auto* data = image.ptr<cv::Vec3b>(0);
  for (Index r = 0; r < sp.region_count(); ++r) {
    for (auto p : sp.pixels(r))
      for (int c = 0; c < 3; ++c) out(r, c) += data[p][c];
    out.row(r) /= 255.0 * static_cast<double>(sp.area(r));
  }
  return out;
}

}  // namespace cds
