#pragma once

// Binary per-pixel masks, image loading and PNG / run-length encodings.

#include <cstdint>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "cds/error.hpp"

namespace cds {

struct SegmentationMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> fg;  // row-major, 0 or 1

  SegmentationMask() = default;
  SegmentationMask(int w, int h, bool value = false)
      : width(w), height(h), fg(static_cast<std::size_t>(w) * h, value ? 1 : 0) {
    detail::require(w > 0 && h > 0, "mask dimensions must be positive");
  }

  bool at(int x, int y) const { return fg[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { fg[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto v : fg) n += v;
    return n;
  }
  bool same_shape(const SegmentationMask& o) const { return width == o.width && height == o.height; }
  friend bool operator==(const SegmentationMask&, const SegmentationMask&) = default;
};

// Inclusive pixel rectangle.
struct Box {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  long area() const { return static_cast<long>(width()) * height(); }
  bool valid() const { return x1 >= x0 && y1 >= y0; }
  bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
  friend bool operator==(const Box&, const Box&) = default;
};

inline SegmentationMask complement(const SegmentationMask& m) {
  SegmentationMask out = m;
  for (auto& v : out.fg) v = v ? 0 : 1;
  return out;
}

// Any nonzero pixel is foreground.
inline SegmentationMask mask_from_mat(const cv::Mat& m) {
  detail::require(!m.empty() && m.channels() == 1, "mask image must be single-channel");
  cv::Mat u8;
  m.convertTo(u8, CV_8U);
  SegmentationMask out(u8.cols, u8.rows);
  for (int y = 0; y < u8.rows; ++y)
    for (int x = 0; x < u8.cols; ++x) out.set(x, y, u8.at<std::uint8_t>(y, x) != 0);
  return out;
}

// 8-bit, 255 = foreground.
inline cv::Mat mask_to_mat(const SegmentationMask& m) {
  cv::Mat out(m.height, m.width, CV_8U);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) out.at<std::uint8_t>(y, x) = m.at(x, y) ? 255 : 0;
  return out;
}

inline std::vector<std::uint8_t> encode_png(const cv::Mat& img) {
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(".png", img, buf)) throw Error("PNG encoding failed");
  return buf;
}

inline std::vector<std::uint8_t> encode_mask_png(const SegmentationMask& m) { return encode_png(mask_to_mat(m)); }

inline cv::Mat decode_image(const std::vector<std::uint8_t>& bytes, int flags = cv::IMREAD_COLOR) {
  if (bytes.empty()) throw ParseError("empty image payload");
  cv::Mat img = cv::imdecode(bytes, flags);
  if (img.empty()) throw ParseError("cannot decode image");
  return img;
}

inline cv::Mat load_image(const std::string& path, int flags = cv::IMREAD_COLOR) {
  cv::Mat img = cv::imread(path, flags);
  if (img.empty()) throw NotFound("cannot read image " + path);
  return img;
}

inline SegmentationMask load_mask(const std::string& path) {
  return mask_from_mat(load_image(path, cv::IMREAD_GRAYSCALE));
}

inline void save_mask(const std::string& path, const SegmentationMask& m) {
  if (!cv::imwrite(path, mask_to_mat(m))) throw Error("cannot write " + path);
}

// Run lengths over the row-major pixel sequence, starting with a background
// run (possibly 0).
inline std::vector<std::uint32_t> run_length_encode(const SegmentationMask& m) {
  std::vector<std::uint32_t> runs;
  std::uint8_t cur = 0;
  std::uint32_t len = 0;
  for (auto v : m.fg) {
    if (v == cur) {
      ++len;
    } else {
      runs.push_back(len);
      cur = v;
      len = 1;
    }
  }
  runs.push_back(len);
  return runs;
}

inline SegmentationMask run_length_decode(const std::vector<std::uint32_t>& runs, int width, int height) {
  SegmentationMask m(width, height);
  std::size_t pos = 0;
  std::uint8_t cur = 0;
  for (auto len : runs) {
    if (pos + len > m.fg.size()) throw ParseError("run lengths exceed the mask size");
    std::fill_n(m.fg.begin() + static_cast<std::ptrdiff_t>(pos), len, cur);
    pos += len;
    cur ^= 1;
  }
  if (pos != m.fg.size()) throw ParseError("run lengths do not cover the mask");
  return m;
}

}  // namespace cds
