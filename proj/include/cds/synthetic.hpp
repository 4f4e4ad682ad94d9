#pragma once

// Constructed test images with known ground truth. Shapes are unions of
// 10x10 tiles on a 120x90 canvas, so grid superpixels with target 108 can
// represent the ground truth exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <opencv2/core.hpp>

#include "cds/mask.hpp"

namespace cds::synthetic {

inline constexpr int width = 120;
inline constexpr int height = 90;
inline constexpr int tile = 10;
inline constexpr int grid_target = (width / tile) * (height / tile);

enum class Kind { BlobOnGround, TwoBlob, TexturedGround };

inline const char* to_string(Kind k) {
  switch (k) {
    case Kind::BlobOnGround: return "blob-on-ground";
    case Kind::TwoBlob: return "two-blob";
    case Kind::TexturedGround: return "textured-ground";
  }
  return "?";
}

struct Fixture {
  std::string name;
  Kind kind = Kind::BlobOnGround;
  cv::Mat image;          // 8-bit BGR
  SegmentationMask gt;
  Box tight_box;          // ground-truth bounding box grown by 2 pixels
};

// Tile rectangle in tile units, inclusive.
struct TileRect {
  int c0, r0, c1, r1;
};

namespace detail {

inline void paint(SegmentationMask& m, const TileRect& t) {
  for (int y = t.r0 * tile; y < (t.r1 + 1) * tile; ++y)
    for (int x = t.c0 * tile; x < (t.c1 + 1) * tile; ++x) m.set(x, y, true);
}

inline Box bounding_box(const SegmentationMask& m, int pad) {
  Box b{m.width, m.height, -1, -1};
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(x, y)) continue;
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x);
      b.y1 = std::max(b.y1, y);
    }
  }
  return Box{std::max(0, b.x0 - pad), std::max(0, b.y0 - pad), std::min(m.width - 1, b.x1 + pad),
             std::min(m.height - 1, b.y1 + pad)};
}

inline std::uint8_t clamp8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace detail

// Renders foreground pixels in `fg` and background pixels in `bg` (or the
// diagonal stripes, 40% `stripe` when `stripe` is set), plus seeded Gaussian noise.
inline cv::Mat render(const SegmentationMask& gt, cv::Scalar fg, cv::Scalar bg, const cv::Scalar* stripe,
                      double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, noise);
  cv::Mat img(gt.height, gt.width, CV_8UC3);
  for (int y = 0; y < gt.height; ++y) {
    for (int x = 0; x < gt.width; ++x) {
      cv::Scalar c = gt.at(x, y) ? fg : bg;
      if (!gt.at(x, y) && stripe && (x + y) % 5 < 2) c = *stripe;
      auto& px = img.at<cv::Vec3b>(y, x);
      for (int ch = 0; ch < 3; ++ch) px[ch] = detail::clamp8(c[ch] + (noise > 0 ? n(rng) : 0.0));
    }
  }
  return img;
}

inline Fixture make_fixture(std::string name, Kind kind, const std::vector<TileRect>& shape, cv::Scalar fg,
                            cv::Scalar bg, std::uint64_t seed, const cv::Scalar* stripe = nullptr,
                            double noise = 4.0) {
  Fixture f;
  f.name = std::move(name);
  f.kind = kind;
  f.gt = SegmentationMask(width, height);
  for (const auto& t : shape) detail::paint(f.gt, t);
  f.image = render(f.gt, fg, bg, stripe, noise, seed);
  f.tight_box = detail::bounding_box(f.gt, 2);
  return f;
}

// The ten-image suite: four blob-on-ground, three two-blob, three
// textured-ground images. Colours are BGR.
inline std::vector<Fixture> suite(std::uint64_t seed = 7) {
  // Pairs chosen so every colour channel separates object from ground well
  // beyond the noise level.
  std::vector<Fixture> out;
  const cv::Scalar mauve(140, 110, 140), mauve_light(170, 140, 170);
  const cv::Scalar khaki(110, 140, 140), khaki_light(140, 170, 170);
  out.push_back(make_fixture("blob-square", Kind::BlobOnGround, {{4, 3, 7, 5}}, {230, 20, 20}, khaki, seed));
  out.push_back(make_fixture("blob-wide", Kind::BlobOnGround, {{3, 2, 8, 6}}, {20, 230, 20}, mauve, seed + 1));
  out.push_back(make_fixture("blob-L", Kind::BlobOnGround, {{2, 2, 4, 6}, {5, 5, 8, 6}}, {230, 230, 170},
                             {140, 20, 80}, seed + 2));
  out.push_back(make_fixture("blob-cross", Kind::BlobOnGround, {{5, 1, 6, 7}, {3, 3, 8, 4}}, {230, 200, 230},
                             {20, 110, 20}, seed + 3));
  out.push_back(make_fixture("two-blob-side", Kind::TwoBlob, {{2, 3, 4, 5}, {7, 3, 9, 5}}, {200, 230, 230},
                             {110, 20, 50}, seed + 4));
  out.push_back(make_fixture("two-blob-diag", Kind::TwoBlob, {{1, 1, 3, 3}, {8, 5, 10, 7}}, {20, 230, 200},
                             {110, 80, 110}, seed + 5));
  out.push_back(make_fixture("two-blob-stack", Kind::TwoBlob, {{4, 1, 7, 2}, {4, 6, 7, 7}}, {230, 50, 20}, khaki,
                             seed + 6));
  out.push_back(make_fixture("textured-square", Kind::TexturedGround, {{4, 3, 7, 5}}, {50, 230, 20}, mauve, seed + 7,
                             &mauve_light));
  out.push_back(make_fixture("textured-wide", Kind::TexturedGround, {{2, 3, 9, 5}}, {230, 50, 50}, khaki, seed + 8,
                             &khaki_light));
  out.push_back(make_fixture("textured-tall", Kind::TexturedGround, {{5, 1, 7, 7}}, {20, 230, 50}, mauve, seed + 9,
                             &mauve_light));
  return out;
}

// Co-segmentation pairs: 100x80 canvases, 10x8 tiles, one region per tile
// with grid target 80.
inline constexpr int pair_width = 100;
inline constexpr int pair_height = 80;
inline constexpr int pair_grid_target = (pair_width / tile) * (pair_height / tile);

struct PairFixture {
  std::string name;
  std::vector<cv::Mat> images;
  std::vector<SegmentationMask> gt;
};

inline std::pair<cv::Mat, SegmentationMask> pair_image(const TileRect& blob, cv::Scalar fg, cv::Scalar bg,
                                                       std::uint64_t seed) {
  SegmentationMask gt(pair_width, pair_height);
  detail::paint(gt, blob);
  return {render(gt, fg, bg, nullptr, 4.0, seed), gt};
}

// The same bright 2x2-tile blob, at different places, on two different dark
// grounds.
inline PairFixture common_blob_pair(std::uint64_t seed = 7) {
  const cv::Scalar blob(40, 200, 230);
  auto [a, ga] = pair_image({4, 3, 5, 4}, blob, {120, 60, 40}, seed);
  auto [b, gb] = pair_image({2, 2, 3, 3}, blob, {60, 110, 60}, seed + 1);
  return {"common-blob", {a, b}, {ga, gb}};
}

}  // namespace cds::synthetic
