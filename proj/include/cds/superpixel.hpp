#pragma once

// Superpixel maps: per-pixel region labels plus the region adjacency graph.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "cds/graph.hpp"
#include "cds/mask.hpp"

namespace cds {

class SuperpixelMap {
public:
  SuperpixelMap() = default;

  // `labels` are row-major region ids, dense in [0, region_count).
  SuperpixelMap(int width, int height, std::vector<std::int32_t> labels, Index region_count)
      : width_(width), height_(height), labels_(std::move(labels)), count_(region_count) {
    detail::require(width > 0 && height > 0, "superpixel map needs positive dimensions");
    detail::require(labels_.size() == static_cast<std::size_t>(width) * height, "label count mismatch");
    detail::require(count_ > 0, "superpixel map needs at least one region");
    std::vector<char> seen(count_, 0);
    for (auto l : labels_) {
      detail::require(l >= 0 && static_cast<Index>(l) < count_, "region id out of range");
      seen[l] = 1;
    }
    detail::require(std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; }),
                    "region ids must be dense");
    pixels_.assign(count_, {});
    for (std::size_t k = 0; k < labels_.size(); ++k) pixels_[labels_[k]].push_back(static_cast<std::uint32_t>(k));
    std::set<std::pair<Index, Index>> adj;
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        const auto a = label(x, y);
        if (x + 1 < width_ && label(x + 1, y) != a) adj.emplace(std::min(a, label(x + 1, y)), std::max(a, label(x + 1, y)));
        if (y + 1 < height_ && label(x, y + 1) != a) adj.emplace(std::min(a, label(x, y + 1)), std::max(a, label(x, y + 1)));
      }
    }
    adjacency_.assign(adj.begin(), adj.end());
    neighbors_.assign(count_, {});
    for (auto [a, b] : adjacency_) {
      neighbors_[a].push_back(b);
      neighbors_[b].push_back(a);
    }
    for (auto& n : neighbors_) std::sort(n.begin(), n.end());
  }

  int width() const { return width_; }
  int height() const { return height_; }
  Index region_count() const { return count_; }
  Index label(int x, int y) const { return static_cast<Index>(labels_[static_cast<std::size_t>(y) * width_ + x]); }
  const std::vector<std::int32_t>& labels() const { return labels_; }
  // Row-major pixel offsets of region r.
  const std::vector<std::uint32_t>& pixels(Index r) const { return pixels_.at(r); }
  Index area(Index r) const { return pixels_.at(r).size(); }
  // Unordered pairs (a < b) of 4-adjacent regions, sorted.
  const std::vector<std::pair<Index, Index>>& adjacency() const { return adjacency_; }
  const std::vector<Index>& neighbors(Index r) const { return neighbors_.at(r); }
  bool adjacent(Index a, Index b) const {
    const auto& n = neighbors_.at(a);
    return std::binary_search(n.begin(), n.end(), b);
  }

  // Pixel mask of the union of the given regions.
  SegmentationMask mask_of(const std::vector<Index>& regions) const {
    SegmentationMask m(width_, height_);
    for (Index r : regions)
      for (auto p : pixels_.at(r)) m.fg[p] = 1;
    return m;
  }

  friend bool operator==(const SuperpixelMap& a, const SuperpixelMap& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.labels_ == b.labels_;
  }

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::int32_t> labels_;
  Index count_ = 0;
  std::vector<std::vector<std::uint32_t>> pixels_;
  std::vector<std::pair<Index, Index>> adjacency_;
  std::vector<std::vector<Index>> neighbors_;
};

// Builds a map from arbitrary integer labels, renumbered densely in
// ascending order of the original ids. Regions split into several
// 4-connected pieces are accepted with a warning.
inline SuperpixelMap superpixels_from_labels(const cv::Mat& label_image, Diagnostics* diag = nullptr) {
  detail::require(!label_image.empty(), "label image is empty");
  if (label_image.channels() != 1) throw ParseError("label image must be single-channel");
  cv::Mat lab;
  label_image.convertTo(lab, CV_32S);
  const int w = lab.cols, h = lab.rows;
  std::map<std::int32_t, std::int32_t> remap;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) remap.emplace(lab.at<std::int32_t>(y, x), 0);
  std::int32_t next = 0;
  for (auto& [k, v] : remap) v = next++;
  std::vector<std::int32_t> labels(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) labels[static_cast<std::size_t>(y) * w + x] = remap[lab.at<std::int32_t>(y, x)];
  SuperpixelMap sp(w, h, std::move(labels), remap.size());

  if (diag) {
    // Count 4-connected components per region.
    std::vector<int> comp(static_cast<std::size_t>(w) * h, -1);
    std::vector<int> pieces(sp.region_count(), 0);
    std::vector<std::size_t> stack;
    for (std::size_t s = 0; s < comp.size(); ++s) {
      if (comp[s] >= 0) continue;
      const auto r = sp.labels()[s];
      ++pieces[r];
      comp[s] = 1;
      stack.push_back(s);
      while (!stack.empty()) {
        const auto p = stack.back();
        stack.pop_back();
        const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
        const int nx[4] = {x - 1, x + 1, x, x};
        const int ny[4] = {y, y, y - 1, y + 1};
        for (int k = 0; k < 4; ++k) {
          if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
          const auto q = static_cast<std::size_t>(ny[k]) * w + nx[k];
          if (comp[q] < 0 && sp.labels()[q] == r) {
            comp[q] = 1;
            stack.push_back(q);
          }
        }
      }
    }
    for (Index r = 0; r < pieces.size(); ++r)
      if (pieces[r] > 1)
        diag->warn("region " + std::to_string(r) + " is not contiguous (" + std::to_string(pieces[r]) + " pieces)");
  }
  return sp;
}

inline SuperpixelMap ingest_superpixels(const std::string& path, Diagnostics* diag = nullptr) {
  const cv::Mat img = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (img.empty()) throw NotFound("cannot read label image " + path);
  return superpixels_from_labels(img, diag);
}

struct GridShape {
  int cols = 1, rows = 1;
};

// Tile grid for `target` regions: minimizes |log tile aspect| + |log(count / target)|
// over all column counts, keeping the count within 30% of the target.
inline GridShape grid_shape(int width, int height, Index target) {
  detail::require(width > 0 && height > 0, "image dimensions must be positive");
  detail::require(target >= 1, "superpixel target must be at least 1");
  detail::require(target <= static_cast<Index>(width) * height, "superpixel target exceeds pixel count");
  GridShape best;
  double best_score = std::numeric_limits<double>::infinity();
  for (int cols = 1; static_cast<Index>(cols) <= std::min<Index>(width, target); ++cols) {
    for (int rows : {static_cast<int>(std::floor(static_cast<double>(target) / cols)),
                     static_cast<int>(std::ceil(static_cast<double>(target) / cols))}) {
      if (rows < 1 || rows > height) continue;
      const double count = static_cast<double>(cols) * rows;
      if (std::abs(count - static_cast<double>(target)) > 0.3 * static_cast<double>(target)) continue;
      const double aspect = (static_cast<double>(width) / cols) / (static_cast<double>(height) / rows);
      const double score = std::abs(std::log(aspect)) + std::abs(std::log(count / static_cast<double>(target)));
      if (score < best_score - 1e-12) {
        best_score = score;
        best = {cols, rows};
      }
    }
  }
  detail::require(std::isfinite(best_score), "no tile grid within 30% of the superpixel target");
  return best;
}

// Built-in fallback over-segmentation: near-square tiles.
inline SuperpixelMap grid_superpixels(int width, int height, Index target) {
  const auto g = grid_shape(width, height, target);
  std::vector<std::int32_t> labels(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const int ty = static_cast<int>(static_cast<long>(y) * g.rows / height);
    for (int x = 0; x < width; ++x) {
      const int tx = static_cast<int>(static_cast<long>(x) * g.cols / width);
      labels[static_cast<std::size_t>(y) * width + x] = ty * g.cols + tx;
    }
  }
  return SuperpixelMap(width, height, std::move(labels), static_cast<Index>(g.cols) * g.rows);
}

inline SuperpixelMap grid_superpixels(const cv::Mat& image, Index target) {
  return grid_superpixels(image.cols, image.rows, target);
}

inline cv::Mat labels_to_mat(const SuperpixelMap& sp) {
  cv::Mat out(sp.height(), sp.width(), CV_16U);
  detail::require(sp.region_count() <= 65536, "too many regions for a 16-bit label image");
  for (int y = 0; y < sp.height(); ++y)
    for (int x = 0; x < sp.width(); ++x) out.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(sp.label(x, y));
  return out;
}

}  // namespace cds
