#pragma once

// Benchmark harness: a JSON manifest of cases in, a per-case metric report
// (JSON + CSV) out. Failing cases are recorded and the run continues.
//
// Manifest: a list of case objects, or {"cases": [...]}. Case fields:
//   id            string, required
//   mode          scribble | box | loose-box | error-tolerant |
//                 coseg-unsupervised | coseg-interactive
//   image, gt     file paths (relative to the manifest), or "synthetic:<name>"
//                 for a built-in fixture (gt then optional)
//   images, gts   lists of the above, co-segmentation modes
//   superpixels   "grid:<n>" or a label-image path; default grid:108 (grid:80
//                 for co-segmentation)
//   features      "color" | "color+texture" (default color+texture)
//   strategy      sigma strategy object (default {"kind": "single", "sigma": 0.1})
//   annotation    annotation object; when absent it is derived from gt:
//                 synthetic scribbles (scribble, error-tolerant) or the gt
//                 bounding box grown by 2 px (box, loose-box)
//   errors        error-zone pixels in derived scribbles (default 0)
//   looseness     loose-box percentage when the box is derived (default 0)
//   seed          seed for derived scribbles (default 1)
//   scribbles     per-image scribbles for coseg-interactive
//   coseg         co-segmentation options (see apply_coseg_options)
//   sweep         {"errors": [...]} or {"looseness": [...]}: expands into one
//                 case per value, id suffixed with "@errors=<v>"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "cds/coseg.hpp"
#include "cds/features.hpp"
#include "cds/json_io.hpp"
#include "cds/metrics.hpp"
#include "cds/segmentation.hpp"
#include "cds/superpixel.hpp"
#include "cds/synthetic.hpp"

namespace cds {

// Error-zone pixel counts for the error-scribble sweep: 0% to 100% of the 50
// foreground samples.
inline const std::vector<int>& error_sweep_counts() {
  static const std::vector<int> c{0, 5, 10, 20, 30, 40, 50};
  return c;
}

struct CaseMetrics {
  double error_rate = 0, jaccard = 0, dsc = 0, precision = 0, recall = 0, f_measure = 0;
};

// `box` limits the error rate; the whole image when absent.
inline CaseMetrics evaluate(const SegmentationMask& output, const SegmentationMask& gt,
                            const std::optional<Box>& box = std::nullopt, double gamma_sq = 0.3,
                            Diagnostics* diag = nullptr) {
  CaseMetrics m;
  m.error_rate = error_rate(output, gt, box.value_or(Box{0, 0, gt.width - 1, gt.height - 1}));
  m.jaccard = jaccard(output, gt, diag);
  m.dsc = dsc(output, gt, diag);
  const auto p = prf(output, gt, gamma_sq);
  m.precision = p.precision;
  m.recall = p.recall;
  m.f_measure = p.f_measure;
  return m;
}

struct CaseResult {
  std::string id;
  std::string mode;
  bool ok = false;
  std::string error;
  CaseMetrics metrics;
  bool flagged = false;
  std::vector<std::string> warnings;
  std::map<std::string, double> seconds;  // per stage; kept out of the report files
};

struct EvalReport {
  std::vector<CaseResult> cases;

  Index failed() const {
    return std::count_if(cases.begin(), cases.end(), [](const auto& c) { return !c.ok; });
  }

  // Arithmetic mean over successful cases. F is averaged per case, not
  // recomputed from mean precision and recall.
  CaseMetrics mean() const {
    CaseMetrics m;
    double n = 0;
    for (const auto& c : cases) {
      if (!c.ok) continue;
      m.error_rate += c.metrics.error_rate;
      m.jaccard += c.metrics.jaccard;
      m.dsc += c.metrics.dsc;
      m.precision += c.metrics.precision;
      m.recall += c.metrics.recall;
      m.f_measure += c.metrics.f_measure;
      ++n;
    }
    if (n > 0) {
      for (double* v : {&m.error_rate, &m.jaccard, &m.dsc, &m.precision, &m.recall, &m.f_measure}) *v /= n;
    }
    return m;
  }
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

inline std::string resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return (path.is_absolute() ? path : base / path).string();
}

inline std::optional<synthetic::Fixture> synthetic_fixture(const std::string& name) {
  for (auto& f : synthetic::suite())
    if (f.name == name) return f;
  return std::nullopt;
}

struct LoadedImage {
  cv::Mat image;
  std::optional<SegmentationMask> gt;
  std::optional<Box> tight_box;
};

inline LoadedImage load_case_image(const std::filesystem::path& base, const std::string& spec,
                                   const std::optional<std::string>& gt_spec) {
  LoadedImage out;
  const std::string prefix = "synthetic:";
  if (spec.rfind(prefix, 0) == 0) {
    const auto name = spec.substr(prefix.size());
    if (auto f = synthetic_fixture(name)) {
      out.image = f->image;
      out.gt = f->gt;
      out.tight_box = f->tight_box;
    } else if (name == "common-blob/0" || name == "common-blob/1") {
      const auto p = synthetic::common_blob_pair();
      const int k = name.back() - '0';
      out.image = p.images[k];
      out.gt = p.gt[k];
    } else {
      throw NotFound("unknown synthetic image '" + name + "'");
    }
  } else {
    out.image = load_image(resolve(base, spec));
  }
  if (gt_spec) {
    if (gt_spec->rfind(prefix, 0) == 0) {
      const auto g = load_case_image(base, *gt_spec, std::nullopt);
      out.gt = g.gt;
    } else {
      out.gt = load_mask(resolve(base, *gt_spec));
    }
  }
  if (out.gt) require(out.gt->width == out.image.cols && out.gt->height == out.image.rows,
                      "ground truth and image differ in size");
  return out;
}

inline SuperpixelMap load_superpixels(const std::filesystem::path& base, const std::string& spec,
                                      const cv::Mat& image, Diagnostics* diag) {
  if (spec.rfind("grid:", 0) == 0) {
    long long n = 0;
    try {
      n = std::stoll(spec.substr(5));
    } catch (const std::exception&) {
      throw ParseError("bad superpixel source '" + spec + "'");
    }
    if (n < 1) throw ParseError("grid target must be positive");
    return grid_superpixels(image, static_cast<Index>(n));
  }
  auto sp = ingest_superpixels(resolve(base, spec), diag);
  require(sp.width() == image.cols && sp.height() == image.rows, "superpixel map and image differ in size");
  return sp;
}

inline bool texture_flag(const Json& c) {
  const auto f = c.value("features", std::string("color+texture"));
  if (f == "color") return false;
  if (f == "color+texture") return true;
  throw ParseError("unknown feature set '" + f + "'");
}

inline Box gt_box(const SegmentationMask& gt) {
  int x0 = gt.width, y0 = gt.height, x1 = -1, y1 = -1;
  for (int y = 0; y < gt.height; ++y)
    for (int x = 0; x < gt.width; ++x)
      if (gt.at(x, y)) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  require(x1 >= 0, "cannot derive a box from an empty ground truth");
  return Box{std::max(0, x0 - 2), std::max(0, y0 - 2), std::min(gt.width - 1, x1 + 2), std::min(gt.height - 1, y1 + 2)};
}

inline std::optional<std::string> opt_string(const Json& c, const char* key) {
  if (!c.contains(key) || c.at(key).is_null()) return std::nullopt;
  return get_as<std::string>(c.at(key), key);
}

inline void run_single(const std::filesystem::path& base, const Json& c, CaseResult& r) {
  const auto mode = r.mode;
  auto t0 = Clock::now();
  const auto img = load_case_image(base, get_as<std::string>(field(c, "image"), "image"), opt_string(c, "gt"));
  if (!img.gt) throw ParseError("case needs a ground truth ('gt')");
  Diagnostics diag;
  const auto sp = load_superpixels(base, c.value("superpixels", std::string("grid:108")), img.image, &diag);
  r.seconds["superpixels"] = since(t0);
  t0 = Clock::now();
  const auto features = compute_region_features(img.image, sp, texture_flag(c));
  r.seconds["features"] = since(t0);
  const SigmaStrategy strategy = c.contains("strategy") ? strategy_from_json(c.at("strategy")) : SingleSigma{};
  SegmentConfig cfg;
  cfg.extraction.replicator.record_trace = false;
  cfg.ground_truth = &*img.gt;
  const auto seed = c.value("seed", std::uint64_t{1});
  const auto errors = c.value("errors", 0);

  t0 = Clock::now();
  SegmentResult res;
  std::optional<Box> box;
  if (mode == "error-tolerant") {
    Scribble s;
    if (c.contains("annotation")) {
      s = scribble_from_json(c.at("annotation"));
    } else {
      const auto syn = generate_synthetic_scribbles(*img.gt, errors, seed, 0.05, &diag);
      s = Scribble{syn.fg, syn.bg};
    }
    res = segment_error_tolerant(sp, features, s.fg, s.bg, strategy, cfg);
  } else {
    Annotation ann;
    if (c.contains("annotation")) {
      ann = annotation_from_json(c.at("annotation"));
    } else if (mode == "scribble") {
      const auto syn = generate_synthetic_scribbles(*img.gt, errors, seed, 0.05, &diag);
      ann = Scribble{syn.fg, {}};
    } else if (mode == "box" || mode == "loose-box") {
      const Box b = img.tight_box.value_or(gt_box(*img.gt));
      if (mode == "box")
        ann = b;
      else
        ann = LooseBox{b, c.value("looseness", 0.0)};
    } else {
      throw ParseError("unknown mode '" + mode + "'");
    }
    const bool scribble_mode = std::holds_alternative<Scribble>(ann);
    if (scribble_mode != (mode == "scribble"))
      throw ParseError("annotation type does not match mode '" + mode + "'");
    res = segment(sp, features, ann, strategy, cfg);
    box = res.box;
  }
  r.seconds["solve"] = since(t0);
  r.metrics = evaluate(res.mask, *img.gt, box, 0.3, &diag);
  r.flagged = res.flagged;
  for (const auto& d : {diag, res.diagnostics})
    r.warnings.insert(r.warnings.end(), d.warnings.begin(), d.warnings.end());
}

inline std::vector<CaseResult> run_coseg(const std::filesystem::path& base, const Json& c, const std::string& id,
                                         const std::string& mode) {
  const auto t0 = Clock::now();
  const auto specs = get_as<std::vector<std::string>>(field(c, "images"), "images");
  std::vector<std::string> gts;
  if (c.contains("gts")) gts = get_as<std::vector<std::string>>(c.at("gts"), "gts");
  if (!gts.empty() && gts.size() != specs.size()) throw ParseError("'gts' must match 'images'");
  std::vector<cv::Mat> images;
  std::vector<SegmentationMask> truth;
  std::vector<SuperpixelMap> maps;
  Diagnostics diag;
  for (Index k = 0; k < specs.size(); ++k) {
    auto li = load_case_image(base, specs[k], gts.empty() ? std::nullopt : std::optional(gts[k]));
    if (!li.gt) throw ParseError("every co-segmentation image needs a ground truth");
    maps.push_back(load_superpixels(base, c.value("superpixels", std::string("grid:80")), li.image, &diag));
    images.push_back(li.image);
    truth.push_back(*li.gt);
  }
  CosegConfig cfg;
  cfg.extraction.replicator.record_trace = false;
  if (c.contains("coseg")) apply_coseg_options(cfg, c.at("coseg"));
  CosegResult res;
  if (mode == "coseg-unsupervised") {
    res = coseg_unsupervised(images, maps, cfg);
  } else {
    res = coseg_interactive(images, maps, coseg_scribbles_from_json(field(c, "scribbles"), images.size()), cfg);
  }
  const double secs = since(t0);
  std::vector<CaseResult> rows;
  for (Index k = 0; k < images.size(); ++k) {
    CaseResult r;
    r.id = id + "/" + std::to_string(k);
    r.mode = mode;
    r.ok = true;
    r.metrics = evaluate(res.masks[k], truth[k], std::nullopt, 0.3, &diag);
    r.flagged = res.flagged;
    r.warnings = diag.warnings;
    r.warnings.insert(r.warnings.end(), res.diagnostics.warnings.begin(), res.diagnostics.warnings.end());
    r.seconds["coseg"] = secs;
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<Json> expand_sweeps(const Json& c) {
  if (!c.contains("sweep")) return {c};
  const auto& s = c.at("sweep");
  if (!s.is_object() || s.size() != 1) throw ParseError("'sweep' must hold exactly one of 'errors', 'looseness'");
  const auto key = s.begin().key();
  if (key != "errors" && key != "looseness") throw ParseError("unknown sweep parameter '" + key + "'");
  if (!s.begin().value().is_array()) throw ParseError("sweep values must be a list");
  std::vector<Json> out;
  for (const auto& v : s.begin().value()) {
    Json e = c;
    e.erase("sweep");
    e[key] = v;
    e["id"] = get_as<std::string>(field(c, "id"), "id") + "@" + key + "=" + v.dump();
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace detail

inline std::vector<Json> manifest_cases(const Json& manifest) {
  const Json& list = manifest.is_object() && manifest.contains("cases") ? manifest.at("cases") : manifest;
  if (!list.is_array()) throw ParseError("manifest must be a list of cases or {\"cases\": [...]}");
  std::vector<Json> out;
  for (const auto& c : list) {
    if (!c.is_object()) throw ParseError("manifest cases must be objects");
    for (auto& e : detail::expand_sweeps(c)) out.push_back(std::move(e));
  }
  return out;
}

// Relative paths in the manifest resolve against `base`.
inline EvalReport run_benchmark(const Json& manifest, const std::filesystem::path& base = ".") {
  EvalReport report;
  for (const auto& c : manifest_cases(manifest)) {
    const auto id = c.contains("id") && c.at("id").is_string() ? c.at("id").get<std::string>() : std::string("?");
    const auto mode = c.contains("mode") && c.at("mode").is_string() ? c.at("mode").get<std::string>() : std::string("?");
    try {
      if (!c.contains("id") || !c.contains("mode")) throw ParseError("case needs 'id' and 'mode'");
      if (mode == "coseg-unsupervised" || mode == "coseg-interactive") {
        for (auto& r : detail::run_coseg(base, c, id, mode)) report.cases.push_back(std::move(r));
      } else {
        CaseResult r;
        r.id = id;
        r.mode = mode;
        detail::run_single(base, c, r);
        r.ok = true;
        report.cases.push_back(std::move(r));
      }
    } catch (const std::exception& e) {
      CaseResult r;
      r.id = id;
      r.mode = mode;
      r.error = e.what();
      report.cases.push_back(std::move(r));
    }
  }
  return report;
}

inline EvalReport run_benchmark_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open manifest " + path);
  Json m;
  try {
    in >> m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest " + path + ": " + e.what());
  }
  return run_benchmark(m, std::filesystem::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Report files

inline Json metrics_to_json(const CaseMetrics& m) {
  return {{"error_rate", m.error_rate}, {"jaccard", m.jaccard},     {"dsc", m.dsc},
          {"precision", m.precision},   {"recall", m.recall},       {"f_measure", m.f_measure}};
}

inline Json report_to_json(const EvalReport& r) {
  Json cases = Json::array();
  for (const auto& c : r.cases) {
    Json j{{"id", c.id}, {"mode", c.mode}, {"status", c.ok ? "ok" : "failed"}};
    if (c.ok) {
      j["metrics"] = metrics_to_json(c.metrics);
      j["flagged"] = c.flagged;
      j["warnings"] = c.warnings;
    } else {
      j["error"] = c.error;
    }
    cases.push_back(std::move(j));
  }
  return {{"cases", cases},
          {"aggregate",
           {{"cases", r.cases.size()}, {"failed", r.failed()}, {"mean", metrics_to_json(r.mean())}}}};
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace detail

inline std::string report_to_csv(const EvalReport& r) {
  std::string out = "id,mode,status,error_rate,jaccard,dsc,precision,recall,f_measure,flagged,error\n";
  for (const auto& c : r.cases) {
    out += detail::csv_field(c.id) + "," + detail::csv_field(c.mode) + "," + (c.ok ? "ok" : "failed");
    const auto& m = c.metrics;
    for (double v : {m.error_rate, m.jaccard, m.dsc, m.precision, m.recall, m.f_measure})
      out += "," + (c.ok ? detail::fixed(v) : std::string());
    out += std::string(",") + (c.flagged ? "1" : "0") + "," + detail::csv_field(c.error) + "\n";
  }
  return out;
}

inline std::string timing_to_csv(const EvalReport& r) {
  std::string out = "id,stage,seconds\n";
  for (const auto& c : r.cases)
    for (const auto& [stage, s] : c.seconds) out += detail::csv_field(c.id) + "," + stage + "," + detail::fixed(s) + "\n";
  return out;
}

// report.json and report.csv are deterministic; wall-clock times go to
// timing.csv.
inline void write_report(const EvalReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto put = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / name).string());
    out << text;
  };
  put("report.json", report_to_json(r).dump(2) + "\n");
  put("report.csv", report_to_csv(r));
  put("timing.csv", timing_to_csv(r));
}

}  // namespace cds
