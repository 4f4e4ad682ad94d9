#pragma once

// Co-segmentation over several images: block affinities from colour,
// descriptor and orientation-histogram channels, an objectness prior, and
// the unsupervised (pair) and scribble-guided workflows.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "cds/extract.hpp"
#include "cds/features.hpp"
#include "cds/graph.hpp"
#include "cds/mask.hpp"
#include "cds/segmentation.hpp"
#include "cds/superpixel.hpp"

namespace cds {

// ---------------------------------------------------------------------------
// Layout of the global vertex index

// Region r of image k is global vertex offsets[k] + r.
struct ImageLayout {
  std::vector<Index> offsets;
  std::vector<Index> counts;

  explicit ImageLayout(const std::vector<SuperpixelMap>& maps) {
    Index at = 0;
    for (const auto& m : maps) {
      offsets.push_back(at);
      counts.push_back(m.region_count());
      at += m.region_count();
    }
  }
  Index images() const { return offsets.size(); }
  Index total() const { return offsets.empty() ? 0 : offsets.back() + counts.back(); }
  Index global(Index image, Index region) const { return offsets.at(image) + region; }
  std::pair<Index, Index> local(Index v) const {
    for (Index k = offsets.size(); k-- > 0;)
      if (v >= offsets[k]) return {k, v - offsets[k]};
    throw InvalidArgument("vertex out of range");
  }
};

namespace detail {

inline Matrix euclidean_distances(const FeatureTable& a, const FeatureTable& b) {
  require(a.cols() == b.cols(), "feature dimensions differ");
  Matrix d(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) d(i, j) = (a.row(i) - b.row(j)).norm();
  return d;
}

// Min-max rescale of the entries selected by `use` to [0,1]. A constant
// selection becomes all ones and is reported.
inline void normalize_entries(Matrix& m, const std::function<bool(Eigen::Index, Eigen::Index)>& use,
                              const char* what, Diagnostics* diag) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (use(i, j)) {
        lo = std::min(lo, m(i, j));
        hi = std::max(hi, m(i, j));
      }
  if (!(hi >= lo)) return;  // nothing selected
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (use(i, j)) m(i, j) = hi > lo ? (m(i, j) - lo) / (hi - lo) : 1.0;
  if (!(hi > lo)) warn(diag, std::string(what) + ": constant block, normalized to ones");
}

// max(D) - D + min(D) over the selected entries; unselected entries become 0.
inline Matrix flip_distances(const Matrix& d, const std::function<bool(Eigen::Index, Eigen::Index)>& use) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    for (Eigen::Index j = 0; j < d.cols(); ++j)
      if (use(i, j)) {
        lo = std::min(lo, d(i, j));
        hi = std::max(hi, d(i, j));
      }
  Matrix out = Matrix::Zero(d.rows(), d.cols());
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    for (Eigen::Index j = 0; j < d.cols(); ++j)
      if (use(i, j)) out(i, j) = hi - d(i, j) + lo;
  return out;
}

inline void check_layout(const std::vector<SuperpixelMap>& maps, Index rows, const char* what) {
  require(!maps.empty(), "at least one image is required");
  require(ImageLayout(maps).total() == rows, std::string(what) + ": one row per region of every image required");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Channels

// Cross-image colour block: D = Euclidean distances between region colour
// vectors, flipped as max(D) - D + min(D) over the whole block, then min-max
// normalized.
inline Matrix color_cross_similarity_raw(const FeatureTable& fi, const FeatureTable& fj) {
  const Matrix d = detail::euclidean_distances(fi, fj);
  return detail::flip_distances(d, [](auto, auto) { return true; });
}

inline Matrix color_cross_similarity(const FeatureTable& fi, const FeatureTable& fj, Diagnostics* diag = nullptr) {
  Matrix s = color_cross_similarity_raw(fi, fj);
  detail::normalize_entries(s, [](auto, auto) { return true; }, "colour cross block", diag);
  return s;
}

// All-pairs shortest paths over the region adjacency graph, edges weighted
// by the Euclidean distance of region colours. Unreachable pairs are +inf.
inline Matrix geodesic_distances(const SuperpixelMap& sp, const FeatureTable& colors) {
  const Index n = sp.region_count();
  detail::require(static_cast<Index>(colors.rows()) == n, "one colour row per region required");
  const double inf = std::numeric_limits<double>::infinity();
  Matrix d = Matrix::Constant(n, n, inf);
  using Item = std::pair<double, Index>;
  for (Index s = 0; s < n; ++s) {
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    d(s, s) = 0.0;
    pq.emplace(0.0, s);
    while (!pq.empty()) {
      const auto [du, u] = pq.top();
      pq.pop();
      if (du > d(s, u)) continue;
      for (Index v : sp.neighbors(u)) {
        const double nd = du + (colors.row(u) - colors.row(v)).norm();
        if (nd < d(s, v)) {
          d(s, v) = nd;
          pq.emplace(nd, v);
        }
      }
    }
  }
  return d;
}

// e(p,q) = max(D) - D(p,q) + min(D) for adjacent regions, 0 otherwise, with
// max and min taken over the off-diagonal distances of p's connected
// component. The block is then min-max normalized over its off-diagonal
// entries (the gated zeros included).
inline Matrix intra_image_geodesic_similarity_raw(const SuperpixelMap& sp, const FeatureTable& colors) {
  const Matrix d = geodesic_distances(sp, colors);
  const Index n = sp.region_count();
  // Component id = smallest reachable region.
  std::vector<Index> comp(n);
  for (Index p = 0; p < n; ++p)
    for (Index q = 0; q <= p; ++q)
      if (std::isfinite(d(p, q))) {
        comp[p] = q;
        break;
      }
  std::vector<double> lo(n, std::numeric_limits<double>::infinity()), hi(n, -std::numeric_limits<double>::infinity());
  for (Index p = 0; p < n; ++p)
    for (Index q = 0; q < n; ++q)
      if (p != q && std::isfinite(d(p, q))) {
        lo[comp[p]] = std::min(lo[comp[p]], d(p, q));
        hi[comp[p]] = std::max(hi[comp[p]], d(p, q));
      }
  Matrix e = Matrix::Zero(n, n);
  for (auto [p, q] : sp.adjacency()) e(p, q) = e(q, p) = hi[comp[p]] - d(p, q) + lo[comp[p]];
  return e;
}

inline Matrix intra_image_geodesic_similarity(const SuperpixelMap& sp, const FeatureTable& colors,
                                              Diagnostics* diag = nullptr) {
  Matrix e = intra_image_geodesic_similarity_raw(sp, colors);
  if (e.rows() > 1)
    detail::normalize_entries(e, [](auto i, auto j) { return i != j; }, "geodesic block", diag);
  return e;
}

inline FeatureTable align_dominant_bin(const FeatureTable& h) {
  FeatureTable out = FeatureTable::Zero(h.rows(), h.cols());
  for (Eigen::Index r = 0; r < h.rows(); ++r) {
    const double sum = h.row(r).sum();
    if (!(sum > 0)) continue;
    Eigen::Index top = 0;
    h.row(r).maxCoeff(&top);
    for (Eigen::Index b = 0; b < h.cols(); ++b) out(r, b) = h(r, (top + b) % h.cols()) / sum;
  }
  return out;
}

// Per-region histogram of gradient orientations (magnitude weighted),
// circularly shifted so the dominant bin comes first. Rows sum to 1 (all-zero
// rows stay zero).
inline FeatureTable orientation_histograms(const cv::Mat& image, const SuperpixelMap& sp, int bins = 16) {
  detail::require(!image.empty() && image.type() == CV_8UC3, "image must be 8-bit, 3 channels");
  detail::require(image.cols == sp.width() && image.rows == sp.height(), "image and superpixel map differ in size");
  detail::require(bins >= 2, "need at least two orientation bins");
  cv::Mat grey, gx, gy, mag, ang;
  cv::cvtColor(image, grey, cv::COLOR_BGR2GRAY);
  grey.convertTo(grey, CV_32F, 1.0 / 255.0);
  cv::Sobel(grey, gx, CV_32F, 1, 0, 3, 1.0, 0.0, cv::BORDER_REFLECT);
  cv::Sobel(grey, gy, CV_32F, 0, 1, 3, 1.0, 0.0, cv::BORDER_REFLECT);
  cv::cartToPolar(gx, gy, mag, ang, false);
  const auto* m = mag.ptr<float>(0);
  const auto* a = ang.ptr<float>(0);
  FeatureTable h = FeatureTable::Zero(sp.region_count(), bins);
  const double width = 2.0 * std::numbers::pi / bins;
  for (Index r = 0; r < sp.region_count(); ++r)
    for (auto p : sp.pixels(r)) h(r, static_cast<int>(a[p] / width) % bins) += m[p];
  return align_dominant_bin(h);
}

inline double chi_squared(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  double s = 0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const double t = a(k) + b(k);
    if (t > 0) s += (a(k) - b(k)) * (a(k) - b(k)) / t;
  }
  return 0.5 * s;
}

// Dot products of unit-normalized descriptors, clamped at 0, zero diagonal;
// within one image only adjacent regions keep their similarity.
inline Matrix descriptor_similarity(const FeatureTable& descriptors, const std::vector<SuperpixelMap>& maps,
                                    Diagnostics* diag = nullptr) {
  detail::check_layout(maps, descriptors.rows(), "descriptors");
  const ImageLayout lay(maps);
  FeatureTable u = descriptors;
  for (Eigen::Index r = 0; r < u.rows(); ++r) {
    const double n = u.row(r).norm();
    if (n > 0) {
      u.row(r) /= n;
    } else {
      u.row(r).setZero();
      warn(diag, "descriptor of vertex " + std::to_string(r) + " has zero norm; its similarities are 0");
    }
  }
  Matrix s = (u * u.transpose()).cwiseMax(0.0);
  s.diagonal().setZero();
  for (Index k = 0; k < lay.images(); ++k) {
    const Index o = lay.offsets[k];
    for (Index p = 0; p < lay.counts[k]; ++p)
      for (Index q = 0; q < lay.counts[k]; ++q)
        if (p != q && !maps[k].adjacent(p, q)) s(o + p, o + q) = 0.0;
  }
  return s;
}

// Chi-squared histogram distances, flipped and normalized blockwise like
// the colour channel. Within one image only adjacent pairs are kept.
inline Matrix hog_similarity(const FeatureTable& hists, const std::vector<SuperpixelMap>& maps,
                             Diagnostics* diag = nullptr) {
  detail::check_layout(maps, hists.rows(), "histograms");
  const ImageLayout lay(maps);
  const Index n = lay.total();
  Matrix out = Matrix::Zero(n, n);
  for (Index a = 0; a < lay.images(); ++a) {
    for (Index b = a; b < lay.images(); ++b) {
      Matrix d(lay.counts[a], lay.counts[b]);
      for (Index p = 0; p < lay.counts[a]; ++p)
        for (Index q = 0; q < lay.counts[b]; ++q)
          d(p, q) = chi_squared(hists.row(lay.offsets[a] + p).transpose(), hists.row(lay.offsets[b] + q).transpose());
      std::function<bool(Eigen::Index, Eigen::Index)> use = [](auto, auto) { return true; };
      if (a == b)
        use = [&, a](Eigen::Index p, Eigen::Index q) {
          return p != q && maps[a].adjacent(static_cast<Index>(p), static_cast<Index>(q));
        };
      Matrix s = detail::flip_distances(d, use);
      detail::normalize_entries(s, use, a == b ? "orientation intra block" : "orientation cross block", diag);
      out.block(lay.offsets[a], lay.offsets[b], lay.counts[a], lay.counts[b]) = s;
      if (a != b) out.block(lay.offsets[b], lay.offsets[a], lay.counts[b], lay.counts[a]) = s.transpose();
    }
  }
  return out;
}

// Colour channel: geodesic blocks on the diagonal, cross-image similarity
// blocks elsewhere.
inline Matrix color_channel(const std::vector<FeatureTable>& colors, const std::vector<SuperpixelMap>& maps,
                            Diagnostics* diag = nullptr) {
  detail::require(colors.size() == maps.size(), "one colour table per image required");
  const ImageLayout lay(maps);
  Matrix out = Matrix::Zero(lay.total(), lay.total());
  for (Index a = 0; a < lay.images(); ++a) {
    out.block(lay.offsets[a], lay.offsets[a], lay.counts[a], lay.counts[a]) =
        intra_image_geodesic_similarity(maps[a], colors[a], diag);
    for (Index b = a + 1; b < lay.images(); ++b) {
      const Matrix s = color_cross_similarity(colors[a], colors[b], diag);
      out.block(lay.offsets[a], lay.offsets[b], lay.counts[a], lay.counts[b]) = s;
      out.block(lay.offsets[b], lay.offsets[a], lay.counts[b], lay.counts[a]) = s.transpose();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Objectness

struct ObjectnessScores {
  std::vector<double> pb;  // backgroundness
  std::vector<double> pf;  // 1 - pb

  static ObjectnessScores from_pf(std::vector<double> pf) {
    ObjectnessScores s;
    for (double v : pf) detail::require(v >= 0.0 && v <= 1.0, "objectness scores must lie in [0,1]");
    s.pb.reserve(pf.size());
    for (double v : pf) s.pb.push_back(1.0 - v);
    s.pf = std::move(pf);
    return s;
  }
};

// Built-in provider: pixel edges on the image border per region divided by
// sqrt(area), scaled so the largest value in the image is 1.
inline ObjectnessScores objectness_scores(const SuperpixelMap& sp) {
  const Index n = sp.region_count();
  std::vector<double> contact(n, 0.0);
  const int w = sp.width(), h = sp.height();
  for (int x = 0; x < w; ++x) {
    contact[sp.label(x, 0)] += 1;
    contact[sp.label(x, h - 1)] += 1;
  }
  for (int y = 0; y < h; ++y) {
    contact[sp.label(0, y)] += 1;
    contact[sp.label(w - 1, y)] += 1;
  }
  double top = 0;
  for (Index r = 0; r < n; ++r) {
    contact[r] /= std::sqrt(static_cast<double>(sp.area(r)));
    top = std::max(top, contact[r]);
  }
  ObjectnessScores s;
  for (Index r = 0; r < n; ++r) {
    s.pb.push_back(top > 0 ? contact[r] / top : 0.0);
    s.pf.push_back(1.0 - s.pb.back());
  }
  return s;
}

// Geodesic alternative: a region whose colour-geodesic neighbourhood
// reaches far along the image border is background. With
// S(p,i) = exp(-d_geo(p,i)^2 / (2 sigma_color^2)),
// connectivity(p) = sum_{i on border} S(p,i) / sqrt(sum_i S(p,i)) and
// P_b = 1 - exp(-connectivity^2 / (2 sigma_bnd^2)).
inline ObjectnessScores boundary_connectivity(const cv::Mat& image, const SuperpixelMap& sp,
                                              double sigma_color = 0.1, double sigma_bnd = 1.0) {
  detail::require(sigma_color > 0 && sigma_bnd > 0, "boundary connectivity scales must be positive");
  const Matrix d = geodesic_distances(sp, region_mean_colors(image, sp));
  const Index n = sp.region_count();
  std::vector<char> border(n, 0);
  for (int x = 0; x < sp.width(); ++x) border[sp.label(x, 0)] = border[sp.label(x, sp.height() - 1)] = 1;
  for (int y = 0; y < sp.height(); ++y) border[sp.label(0, y)] = border[sp.label(sp.width() - 1, y)] = 1;
  ObjectnessScores s;
  for (Index p = 0; p < n; ++p) {
    double len = 0, area = 0;
    for (Index i = 0; i < n; ++i) {
      const double w = std::exp(-d(p, i) * d(p, i) / (2 * sigma_color * sigma_color));
      area += w;
      if (border[i]) len += w;
    }
    const double con = len / std::sqrt(area);
    s.pb.push_back(1.0 - std::exp(-con * con / (2 * sigma_bnd * sigma_bnd)));
    s.pf.push_back(1.0 - s.pb.back());
  }
  return s;
}

// One P_f value per line (blank lines and lines starting with '#' skipped).
inline ObjectnessScores load_objectness(const std::string& path, Index regions) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open objectness file " + path);
  std::vector<double> pf;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    double v;
    if (!(ss >> v)) throw ParseError("objectness file " + path + ": bad line '" + line + "'");
    if (!(v >= 0.0 && v <= 1.0)) throw ParseError("objectness file " + path + ": score outside [0,1]");
    pf.push_back(v);
  }
  if (pf.size() != regions)
    throw ParseError("objectness file " + path + ": expected " + std::to_string(regions) + " scores, got " +
                     std::to_string(pf.size()));
  return ObjectnessScores::from_pf(std::move(pf));
}

inline Matrix objectness_affinity(const std::vector<double>& pf) {
  const auto n = static_cast<Eigen::Index>(pf.size());
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = i == j ? 0.0 : pf[i] * pf[j];
  return m;
}

inline constexpr double objectness_weight = 0.5;
inline constexpr double feature_weight = 1.0 / 6.0;

inline AffinityMatrix combine(const Matrix& am, const Matrix& ac, const Matrix& as, const Matrix& ah) {
  detail::require(am.rows() == am.cols() && ac.rows() == am.rows() && ac.cols() == am.cols() &&
                      as.rows() == am.rows() && as.cols() == am.cols() && ah.rows() == am.rows() &&
                      ah.cols() == am.cols(),
                  "channel matrices must share one square shape");
  Matrix a = objectness_weight * am + feature_weight * (ac + as + ah);
  return AffinityMatrix::from_upper(std::move(a));
}

enum class CosegLabel : std::uint8_t { Unlabeled, Foreground, Background };

// Zeroes every entry joining a foreground-labelled and a background-labelled
// vertex.
inline AffinityMatrix apply_labels(const AffinityMatrix& a, const std::vector<CosegLabel>& labels) {
  detail::require(labels.size() == a.size(), "one label per vertex required");
  Matrix m = a.matrix();
  for (Index i = 0; i < labels.size(); ++i)
    for (Index j = 0; j < labels.size(); ++j)
      if ((labels[i] == CosegLabel::Foreground && labels[j] == CosegLabel::Background) ||
          (labels[i] == CosegLabel::Background && labels[j] == CosegLabel::Foreground))
        m(i, j) = 0.0;
  return AffinityMatrix(std::move(m));
}

// ---------------------------------------------------------------------------
// Multi-image graph

// What one constrained extraction contributes to the workflow: the
// peel-off cluster with the largest payoff, the first one, or the union of
// all rounds.
enum class RunOutput { BestCluster, FirstCluster, Union };

enum class ObjectnessProvider { BorderContact, BoundaryConnectivity };

namespace detail {

// Peel-off rounds on the combined graph often end on flat payoff plateaus;
// a tighter budget keeps a pair run well under a second.
inline ExtractionConfig coseg_extraction() {
  ExtractionConfig c;
  c.replicator.max_iters = 10000;
  return c;
}

}  // namespace detail

struct CosegConfig {
  ExtractionConfig extraction = detail::coseg_extraction();
  ObjectnessProvider objectness_provider = ObjectnessProvider::BorderContact;
  int orientation_bins = 16;
  // Optional per-image overrides; empty means the built-in providers.
  std::vector<FeatureTable> descriptors;         // rows = regions of that image
  std::vector<ObjectnessScores> objectness;
  RunOutput run_output = RunOutput::BestCluster;
};

struct MultiImageGraph {
  ImageLayout layout;
  Matrix color, descriptor, hog, objectness;
  std::vector<ObjectnessScores> scores;
  AffinityMatrix combined;
  Diagnostics diagnostics;
};

inline MultiImageGraph build_multi_image_graph(const std::vector<cv::Mat>& images,
                                               const std::vector<SuperpixelMap>& maps, const CosegConfig& cfg = {}) {
  detail::require(!images.empty() && images.size() == maps.size(), "one superpixel map per image required");
  detail::require(cfg.descriptors.empty() || cfg.descriptors.size() == images.size(),
                  "descriptor overrides must cover every image");
  detail::require(cfg.objectness.empty() || cfg.objectness.size() == images.size(),
                  "objectness overrides must cover every image");
  MultiImageGraph g{ImageLayout(maps), {}, {}, {}, {}, {}, {}, {}};
  const Index n = g.layout.total();
  std::vector<FeatureTable> colors;
  FeatureTable hists(n, cfg.orientation_bins), desc;
  for (Index k = 0; k < images.size(); ++k) {
    colors.push_back(region_mean_colors(images[k], maps[k]));
    hists.middleRows(g.layout.offsets[k], g.layout.counts[k]) =
        orientation_histograms(images[k], maps[k], cfg.orientation_bins);
  }
  if (cfg.descriptors.empty()) {
    desc = hists;
  } else {
    desc.resize(n, cfg.descriptors.front().cols());
    for (Index k = 0; k < images.size(); ++k) {
      detail::require(static_cast<Index>(cfg.descriptors[k].rows()) == g.layout.counts[k] &&
                          cfg.descriptors[k].cols() == desc.cols(),
                      "descriptor table " + std::to_string(k) + " has the wrong shape");
      desc.middleRows(g.layout.offsets[k], g.layout.counts[k]) = cfg.descriptors[k];
    }
  }
  std::vector<double> pf;
  for (Index k = 0; k < images.size(); ++k) {
    if (!cfg.objectness.empty())
      g.scores.push_back(cfg.objectness[k]);
    else if (cfg.objectness_provider == ObjectnessProvider::BoundaryConnectivity)
      g.scores.push_back(boundary_connectivity(images[k], maps[k]));
    else
      g.scores.push_back(objectness_scores(maps[k]));
    detail::require(g.scores.back().pf.size() == g.layout.counts[k], "objectness scores must cover every region");
    pf.insert(pf.end(), g.scores.back().pf.begin(), g.scores.back().pf.end());
  }
  g.color = color_channel(colors, maps, &g.diagnostics);
  g.descriptor = descriptor_similarity(desc, maps, &g.diagnostics);
  g.hog = hog_similarity(hists, maps, &g.diagnostics);
  g.objectness = objectness_affinity(pf);
  g.combined = combine(g.objectness, g.color, g.descriptor, g.hog);
  return g;
}

// ---------------------------------------------------------------------------
// Workflows

struct CosegRun {
  std::string name;
  std::vector<Index> constraint;  // global vertices
  ExtractionResult extraction;    // supports in global vertices

  std::vector<Index> output(RunOutput mode) const {
    const auto& cs = extraction.clusters;
    if (cs.empty()) return {};
    switch (mode) {
      case RunOutput::Union: return extraction.union_support();
      case RunOutput::FirstCluster: return cs.front().support;
      case RunOutput::BestCluster: break;
    }
    // First maximum wins on ties.
    auto best = cs.begin();
    for (auto it = cs.begin(); it != cs.end(); ++it)
      if (it->payoff > best->payoff) best = it;
    return best->support;
  }
};

struct CosegResult {
  std::vector<SegmentationMask> masks;
  std::vector<std::vector<Index>> foreground;  // per image, local region ids
  std::vector<ObjectnessScores> objectness;
  std::vector<CosegLabel> labels;              // per global vertex (interactive mode)
  std::vector<CosegRun> runs;
  bool flagged = false;
  Diagnostics diagnostics;
};

namespace detail {

inline ExtractionResult extract_on(const AffinityMatrix& a, const std::vector<Index>& vertices,
                                   const std::vector<Index>& constraint, const ExtractionConfig& cfg) {
  // Restrict to `vertices` and map the result back to their global ids.
  std::vector<Index> local;
  for (Index v : constraint)
    local.push_back(static_cast<Index>(std::lower_bound(vertices.begin(), vertices.end(), v) - vertices.begin()));
  auto r = extract_constrained_dominant_sets(a.principal(vertices), ConstraintSet(local, vertices.size()), cfg);
  auto to_global = [&](std::vector<Index>& xs) {
    for (auto& x : xs) x = vertices[x];
  };
  for (auto& c : r.clusters) {
    to_global(c.support);
    to_global(c.contains_constraints);
    Vector full = Vector::Zero(a.size());
    for (Index i = 0; i < vertices.size(); ++i) full(vertices[i]) = c.characteristic[i];
    c.characteristic = SimplexVector(full);
  }
  to_global(r.covered_constraints);
  return r;
}

inline std::vector<Index> iota_range(Index from, Index count) {
  std::vector<Index> v(count);
  std::iota(v.begin(), v.end(), from);
  return v;
}

inline void render_masks(CosegResult& out, const std::vector<SuperpixelMap>& maps, const ImageLayout& lay,
                         const std::vector<Index>& fg_global) {
  out.foreground.assign(maps.size(), {});
  for (Index v : fg_global) {
    const auto [k, r] = lay.local(v);
    out.foreground[k].push_back(r);
  }
  out.masks.clear();
  for (Index k = 0; k < maps.size(); ++k) out.masks.push_back(maps[k].mask_of(out.foreground[k]));
}

// Foreground = vertices in both run outputs (sorted); empty is flagged.
inline void finish_pair(CosegResult& out, const std::vector<SuperpixelMap>& maps, const ImageLayout& lay,
                        const std::vector<Index>& o1, const std::vector<Index>& o2) {
  std::vector<Index> fg;
  std::set_intersection(o1.begin(), o1.end(), o2.begin(), o2.end(), std::back_inserter(fg));
  render_masks(out, maps, lay, fg);
  if (fg.empty()) {
    out.flagged = true;
    out.diagnostics.warn("the two outputs do not intersect; no common foreground");
  }
}

// Lexicographic order on (size, pixels, labels); used to make the pair
// workflow independent of argument order.
inline bool image_less(const cv::Mat& a, const SuperpixelMap& sa, const cv::Mat& b, const SuperpixelMap& sb) {
  if (a.rows != b.rows) return a.rows < b.rows;
  if (a.cols != b.cols) return a.cols < b.cols;
  const cv::Mat ca = a.isContinuous() ? a : a.clone(), cb = b.isContinuous() ? b : b.clone();
  const auto bytes = ca.total() * ca.elemSize();
  if (const int c = std::memcmp(ca.data, cb.data, bytes); c != 0) return c < 0;
  return sa.labels() < sb.labels();
}

}  // namespace detail

// Pair mode: extraction constrained by all of image 1 selects the regions of
// image 2 that join it, and vice versa; each image keeps the regions the
// other image's run selected (the intersection of the two outputs).
inline CosegResult coseg_unsupervised(const std::vector<cv::Mat>& images, const std::vector<SuperpixelMap>& maps,
                                      const CosegConfig& cfg = {}) {
  detail::require(images.size() == 2 && maps.size() == 2, "unsupervised co-segmentation takes exactly two images");
  if (detail::image_less(images[1], maps[1], images[0], maps[0])) {
    CosegConfig swapped = cfg;
    if (!swapped.descriptors.empty()) std::swap(swapped.descriptors[0], swapped.descriptors[1]);
    if (!swapped.objectness.empty()) std::swap(swapped.objectness[0], swapped.objectness[1]);
    auto r = coseg_unsupervised({images[1], images[0]}, {maps[1], maps[0]}, swapped);
    std::swap(r.masks[0], r.masks[1]);
    std::swap(r.foreground[0], r.foreground[1]);
    std::swap(r.objectness[0], r.objectness[1]);
    const ImageLayout orig(maps), flipped({maps[1], maps[0]});
    auto remap = [&](std::vector<Index>& xs) {
      for (auto& x : xs) {
        const auto [k, reg] = flipped.local(x);
        x = orig.global(1 - k, reg);
      }
      std::sort(xs.begin(), xs.end());
    };
    for (auto& run : r.runs) {
      remap(run.constraint);
      for (auto& c : run.extraction.clusters) {
        remap(c.support);
        remap(c.contains_constraints);
        Vector full(orig.total());
        for (Index v = 0; v < orig.total(); ++v) {
          const auto [k, reg] = flipped.local(v);
          full(orig.global(1 - k, reg)) = c.characteristic[v];
        }
        c.characteristic = SimplexVector(full);
      }
      remap(run.extraction.covered_constraints);
    }
    std::swap(r.runs[0], r.runs[1]);
    r.runs[0].name = "constrained-by-image-1";
    r.runs[1].name = "constrained-by-image-2";
    return r;
  }

  auto g = build_multi_image_graph(images, maps, cfg);
  CosegResult out;
  out.diagnostics = g.diagnostics;
  out.objectness = g.scores;
  const auto all = detail::iota_range(0, g.layout.total());
  std::vector<Index> outputs[2];
  for (Index k = 0; k < 2; ++k) {
    CosegRun run;
    run.name = "constrained-by-image-" + std::to_string(k + 1);
    run.constraint = detail::iota_range(g.layout.offsets[k], g.layout.counts[k]);
    run.extraction = detail::extract_on(g.combined, all, run.constraint, cfg.extraction);
    outputs[k] = run.output(cfg.run_output);
    out.runs.push_back(std::move(run));
  }
  detail::finish_pair(out, maps, g.layout, outputs[0], outputs[1]);
  return out;
}

// Scribble-guided mode. `scribbles[k]` is empty for unscribbled images.
// Stage 1 runs on the scribbled images only: O1 from the foreground marks, O2
// from the background marks, refined sets F = O1 \ O2 and B = O2 \ O1.
// Stage 2 labels F and B, zeroes F-B affinities, and runs on all images with
// S = B and S = F; the foreground is the F-run output minus the B-run output.
inline CosegResult coseg_interactive(const std::vector<cv::Mat>& images, const std::vector<SuperpixelMap>& maps,
                                     const std::vector<std::optional<Scribble>>& scribbles,
                                     const CosegConfig& cfg = {}) {
  detail::require(scribbles.size() == images.size(), "one (possibly empty) scribble entry per image required");
  auto g = build_multi_image_graph(images, maps, cfg);
  const auto& lay = g.layout;
  std::vector<Index> fg_marks, bg_marks, scribbled;
  for (Index k = 0; k < images.size(); ++k) {
    if (!scribbles[k]) continue;
    for (Index r : regions_hit(maps[k], scribbles[k]->fg)) fg_marks.push_back(lay.global(k, r));
    for (Index r : regions_hit(maps[k], scribbles[k]->bg)) bg_marks.push_back(lay.global(k, r));
    const auto block = detail::iota_range(lay.offsets[k], lay.counts[k]);
    scribbled.insert(scribbled.end(), block.begin(), block.end());
  }
  detail::require(!scribbled.empty(), "at least one image must carry scribbles");
  detail::require(!fg_marks.empty() && !bg_marks.empty(), "scribbles need both foreground and background marks");
  std::vector<Index> both;
  std::set_intersection(fg_marks.begin(), fg_marks.end(), bg_marks.begin(), bg_marks.end(), std::back_inserter(both));
  if (!both.empty())
    throw InvalidArgument("contradictory scribbles: " + std::to_string(both.size()) +
                          " region(s) marked both foreground and background");

  CosegResult out;
  out.diagnostics = g.diagnostics;
  out.objectness = g.scores;

  auto run = [&](std::string name, const std::vector<Index>& vertices, const AffinityMatrix& a,
                 const std::vector<Index>& s) {
    CosegRun r{std::move(name), s, detail::extract_on(a, vertices, s, cfg.extraction)};
    out.runs.push_back(r);
    return r.output(cfg.run_output);
  };
  const auto o1 = run("stage1-foreground", scribbled, g.combined, fg_marks);
  const auto o2 = run("stage1-background", scribbled, g.combined, bg_marks);
  std::vector<Index> f_s, b_s;
  std::set_difference(o1.begin(), o1.end(), o2.begin(), o2.end(), std::back_inserter(f_s));
  std::set_difference(o2.begin(), o2.end(), o1.begin(), o1.end(), std::back_inserter(b_s));
  if (f_s.empty())
    throw InvalidArgument("contradictory scribbles: the refined foreground set is empty");

  out.labels.assign(lay.total(), CosegLabel::Unlabeled);
  for (Index v : f_s) out.labels[v] = CosegLabel::Foreground;
  for (Index v : b_s) out.labels[v] = CosegLabel::Background;
  const auto labelled = apply_labels(g.combined, out.labels);
  const auto all = detail::iota_range(0, lay.total());
  std::vector<Index> o_b;
  if (!b_s.empty())
    o_b = run("stage2-background", all, labelled, b_s);
  else
    out.diagnostics.warn("the refined background set is empty; stage 2 runs on the foreground set only");
  const auto o_f = run("stage2-foreground", all, labelled, f_s);
  std::vector<Index> fg;
  std::set_difference(o_f.begin(), o_f.end(), o_b.begin(), o_b.end(), std::back_inserter(fg));
  detail::render_masks(out, maps, lay, fg);
  if (fg.empty()) {
    out.flagged = true;
    out.diagnostics.warn("empty foreground after stage 2");
  }
  return out;
}

}  // namespace cds
