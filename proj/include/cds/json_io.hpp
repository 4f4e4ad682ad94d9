#pragma once

// JSON encodings shared by the benchmark manifest, the CLI and the HTTP
// service. Malformed input raises ParseError.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cds/coseg.hpp"
#include "cds/extract.hpp"
#include "cds/segmentation.hpp"

namespace cds {

using Json = nlohmann::json;

namespace detail {

inline const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
  return j.at(key);
}

template <class T>
T get_as(const Json& j, const char* what) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError(std::string("field '") + what + "' has the wrong type");
  }
}

inline std::vector<cv::Point> points_from_json(const Json& j, const char* what) {
  if (!j.is_array()) throw ParseError(std::string("'") + what + "' must be a list of [x, y] pairs");
  std::vector<cv::Point> out;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer())
      throw ParseError(std::string("'") + what + "' must be a list of integer [x, y] pairs");
    out.emplace_back(p[0].get<int>(), p[1].get<int>());
  }
  return out;
}

inline Json points_to_json(const std::vector<cv::Point>& pts) {
  Json a = Json::array();
  for (const auto& p : pts) a.push_back({p.x, p.y});
  return a;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Annotations

inline Box box_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 4) throw ParseError("'box' must be [x0, y0, x1, y1]");
  for (const auto& v : j)
    if (!v.is_number_integer()) throw ParseError("'box' coordinates must be integers");
  Box b{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
  if (!b.valid()) throw ParseError("'box' needs x1 >= x0 and y1 >= y0");
  return b;
}

inline Json box_to_json(const Box& b) { return Json::array({b.x0, b.y0, b.x1, b.y1}); }

inline Scribble scribble_from_json(const Json& j) {
  Scribble s;
  if (j.contains("fg")) s.fg = detail::points_from_json(j.at("fg"), "fg");
  if (j.contains("bg")) s.bg = detail::points_from_json(j.at("bg"), "bg");
  return s;
}

// {"type": "scribble", "fg": [[x,y],...], "bg": [...]}
// {"type": "box", "box": [x0,y0,x1,y1]}
// {"type": "loose-box", "box": [...], "looseness": 120}
inline Annotation annotation_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("annotation must be a JSON object");
  const auto type = detail::get_as<std::string>(detail::field(j, "type"), "type");
  if (type == "scribble") {
    auto s = scribble_from_json(j);
    if (s.fg.empty()) throw ParseError("scribble annotation needs at least one foreground point");
    return s;
  }
  if (type == "box") return box_from_json(detail::field(j, "box"));
  if (type == "loose-box") {
    const auto& l = detail::field(j, "looseness");
    if (!l.is_number() || !(l.get<double>() >= 0)) throw ParseError("'looseness' must be a number >= 0");
    return LooseBox{box_from_json(detail::field(j, "box")), l.get<double>()};
  }
  throw ParseError("unknown annotation type '" + type + "'");
}

inline Json annotation_to_json(const Annotation& a) {
  if (const auto* s = std::get_if<Scribble>(&a))
    return {{"type", "scribble"}, {"fg", detail::points_to_json(s->fg)}, {"bg", detail::points_to_json(s->bg)}};
  if (const auto* b = std::get_if<Box>(&a)) return {{"type", "box"}, {"box", box_to_json(*b)}};
  const auto& l = std::get<LooseBox>(a);
  return {{"type", "loose-box"}, {"box", box_to_json(l.box)}, {"looseness", l.looseness}};
}

// ---------------------------------------------------------------------------
// Sigma strategies

// {"kind": "single", "sigma": 0.2} | {"kind": "best", "grid": [...]} |
// {"kind": "self-tuning", "k": 7}
inline SigmaStrategy strategy_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("strategy must be a JSON object");
  const auto kind = detail::get_as<std::string>(detail::field(j, "kind"), "kind");
  if (kind == "single") {
    SingleSigma s;
    if (j.contains("sigma")) s.value = detail::get_as<double>(j.at("sigma"), "sigma");
    if (!(s.value > 0)) throw ParseError("'sigma' must be positive");
    return s;
  }
  if (kind == "best") {
    BestSigma b;
    if (j.contains("grid")) b.grid = detail::get_as<std::vector<double>>(j.at("grid"), "grid");
    if (b.grid.empty()) throw ParseError("'grid' must not be empty");
    for (double v : b.grid)
      if (!(v > 0)) throw ParseError("'grid' values must be positive");
    return b;
  }
  if (kind == "self-tuning") {
    SelfTuning t;
    if (j.contains("k")) {
      const auto k = detail::get_as<long long>(j.at("k"), "k");
      if (k < 1) throw ParseError("'k' must be at least 1");
      t.k = static_cast<Index>(k);
    }
    return t;
  }
  throw ParseError("unknown strategy kind '" + kind + "'");
}

inline Json strategy_to_json(const SigmaStrategy& s) {
  if (const auto* v = std::get_if<SingleSigma>(&s)) return {{"kind", "single"}, {"sigma", v->value}};
  if (const auto* v = std::get_if<BestSigma>(&s)) return {{"kind", "best"}, {"grid", v->grid}};
  return {{"kind", "self-tuning"}, {"k", std::get<SelfTuning>(s).k}};
}

// ---------------------------------------------------------------------------
// Results

inline Json cluster_to_json(const Cluster& c) {
  return {{"support", c.support},
          {"payoff", c.payoff},
          {"constraints", c.contains_constraints},
          {"alpha", c.alpha},
          {"lambda_max", c.lambda_max},
          {"kkt", c.kkt},
          {"iterations", c.iterations},
          {"converged", c.converged}};
}

inline Json extraction_to_json(const ExtractionResult& r) {
  Json clusters = Json::array();
  for (const auto& c : r.clusters) clusters.push_back(cluster_to_json(c));
  return {{"clusters", clusters}, {"covered_constraints", r.covered_constraints}, {"iterations", r.iterations_total}};
}

inline Json mask_to_json(const SegmentationMask& m) {
  return {{"width", m.width}, {"height", m.height}, {"foreground_pixels", m.count()}, {"rle", run_length_encode(m)}};
}

inline SegmentationMask mask_from_json(const Json& j) {
  const int w = detail::get_as<int>(detail::field(j, "width"), "width");
  const int h = detail::get_as<int>(detail::field(j, "height"), "height");
  const auto rle = detail::get_as<std::vector<std::uint32_t>>(detail::field(j, "rle"), "rle");
  try {
    return run_length_decode(rle, w, h);
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  }
}

inline Json diagnostics_to_json(const Diagnostics& d) { return d.warnings; }

inline Json segment_result_to_json(const SegmentResult& r) {
  Json j{{"mode", to_string(r.mode)},
         {"constraint", r.constraint},
         {"foreground_regions", r.foreground_regions},
         {"flagged", r.flagged},
         {"mask", mask_to_json(r.mask)},
         {"extraction", extraction_to_json(r.extraction)},
         {"warnings", diagnostics_to_json(r.diagnostics)}};
  j["box"] = r.box ? box_to_json(*r.box) : Json(nullptr);
  j["sigma"] = r.sigma ? Json(*r.sigma) : Json(nullptr);
  if (!r.cluster_kept.empty()) {
    Json kept = Json::array();
    for (char k : r.cluster_kept) kept.push_back(k != 0);
    j["cluster_kept"] = kept;
  }
  return j;
}

inline const char* to_string(CosegLabel l) {
  switch (l) {
    case CosegLabel::Foreground: return "fg";
    case CosegLabel::Background: return "bg";
    case CosegLabel::Unlabeled: break;
  }
  return "unlabeled";
}

// Region-level view of one image: label, P_f, foreground flag and, per run,
// the index of the cluster whose support holds the region (null if none).
inline Json coseg_regions_to_json(const CosegResult& r, const std::vector<SuperpixelMap>& maps, Index image) {
  const ImageLayout lay(maps);
  Json regions = Json::array();
  const auto& fg = r.foreground.at(image);
  for (Index reg = 0; reg < lay.counts.at(image); ++reg) {
    const Index v = lay.global(image, reg);
    Json membership = Json::object();
    for (const auto& run : r.runs) {
      Json at = nullptr;
      for (Index c = 0; c < run.extraction.clusters.size(); ++c) {
        const auto& s = run.extraction.clusters[c].support;
        if (std::binary_search(s.begin(), s.end(), v)) {
          at = c;
          break;
        }
      }
      membership[run.name] = at;
    }
    regions.push_back({{"region", reg},
                       {"label", r.labels.empty() ? "unlabeled" : to_string(r.labels[v])},
                       {"pf", r.objectness.at(image).pf.at(reg)},
                       {"foreground", std::binary_search(fg.begin(), fg.end(), reg)},
                       {"clusters", membership}});
  }
  return {{"image", image}, {"regions", regions}, {"mask", mask_to_json(r.masks.at(image))}};
}

inline Json coseg_result_to_json(const CosegResult& r, const std::vector<SuperpixelMap>& maps) {
  Json images = Json::array();
  for (Index k = 0; k < maps.size(); ++k) images.push_back(coseg_regions_to_json(r, maps, k));
  Json runs = Json::array();
  for (const auto& run : r.runs)
    runs.push_back({{"name", run.name}, {"constraint", run.constraint}, {"extraction", extraction_to_json(run.extraction)}});
  return {{"images", images}, {"runs", runs}, {"flagged", r.flagged}, {"warnings", diagnostics_to_json(r.diagnostics)}};
}

// ---------------------------------------------------------------------------
// Co-segmentation options

// {"objectness": "builtin" | "geodesic", "run_output": "best" | "first" | "union"}
inline void apply_coseg_options(CosegConfig& cfg, const Json& j) {
  if (!j.is_object()) throw ParseError("co-segmentation options must be a JSON object");
  if (j.contains("objectness")) {
    const auto o = detail::get_as<std::string>(j.at("objectness"), "objectness");
    if (o == "builtin")
      cfg.objectness_provider = ObjectnessProvider::BorderContact;
    else if (o == "geodesic")
      cfg.objectness_provider = ObjectnessProvider::BoundaryConnectivity;
    else
      throw ParseError("unknown objectness provider '" + o + "'");
  }
  if (j.contains("run_output")) {
    const auto o = detail::get_as<std::string>(j.at("run_output"), "run_output");
    if (o == "best")
      cfg.run_output = RunOutput::BestCluster;
    else if (o == "first")
      cfg.run_output = RunOutput::FirstCluster;
    else if (o == "union")
      cfg.run_output = RunOutput::Union;
    else
      throw ParseError("unknown run output '" + o + "'");
  }
}

// Per-image scribbles: a list with one entry per image, null for images
// without scribbles.
inline std::vector<std::optional<Scribble>> coseg_scribbles_from_json(const Json& j, Index images) {
  if (!j.is_array() || j.size() != images) throw ParseError("scribbles must list one entry (or null) per image");
  std::vector<std::optional<Scribble>> out;
  for (const auto& e : j) {
    if (e.is_null()) {
      out.emplace_back();
    } else {
      if (!e.is_object()) throw ParseError("scribble entries must be objects or null");
      out.emplace_back(scribble_from_json(e));
    }
  }
  return out;
}

}  // namespace cds
