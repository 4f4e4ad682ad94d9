// Command-line front end: extract, segment, coseg, bench, serve.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cds/coseg.hpp"
#include "cds/eval.hpp"
#include "cds/extract.hpp"
#include "cds/graph_io.hpp"
#include "cds/json_io.hpp"
#include "cds/segmentation.hpp"
#include "cds/service.hpp"

namespace fs = std::filesystem;
using namespace cds;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);)
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<Index> parse_indices(const std::string& s) {
  std::vector<Index> out;
  for (const auto& t : split(s, ',')) {
    std::size_t used = 0;
    long long v = -1;
    try {
      v = std::stoll(t, &used);
    } catch (const std::exception&) {
    }
    if (used != t.size() || v < 0) throw ParseError("bad vertex index '" + t + "'");
    out.push_back(static_cast<Index>(v));
  }
  return out;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

SuperpixelMap superpixels_for(const std::string& spec, const cv::Mat& image, Diagnostics* diag) {
  return detail::load_superpixels(".", spec, image, diag);
}

// ---------------------------------------------------------------------------
// extract

struct ExtractArgs {
  std::string graph, constraints, out = "-";
  std::optional<double> alpha, alpha_margin, tol;
  std::optional<long long> max_iters;
  Index multi_start = 0;
  std::uint64_t seed = 0;
};

int run_extract(const ExtractArgs& a) {
  const auto g = io::read_graph_file(a.graph);
  const ConstraintSet s(parse_indices(a.constraints), g.size());
  ExtractionConfig cfg;
  cfg.replicator.record_trace = false;
  cfg.alpha = a.alpha;
  cfg.alpha_margin = a.alpha_margin;
  if (a.tol) cfg.replicator.convergence_tol = *a.tol;
  if (a.max_iters) cfg.replicator.max_iters = static_cast<Index>(*a.max_iters);

  Json out;
  if (a.multi_start > 0) {
    Json clusters = Json::array();
    for (const auto& c : enumerate_local_solutions(g, s, a.multi_start, a.seed, cfg)) {
      auto j = cluster_to_json(c);
      j["characteristic"] = std::vector<double>(c.characteristic.values().begin(), c.characteristic.values().end());
      clusters.push_back(j);
    }
    out = {{"mode", "multi-start"}, {"starts", a.multi_start}, {"clusters", clusters}};
  } else {
    const auto r = extract_constrained_dominant_sets(g, s, cfg);
    out = extraction_to_json(r);
    for (Index k = 0; k < r.clusters.size(); ++k) {
      const auto& x = r.clusters[k].characteristic.values();
      out["clusters"][k]["characteristic"] = std::vector<double>(x.begin(), x.end());
    }
    out["mode"] = "peel-off";
  }
  out["constraints"] = s.members();
  write_text(a.out, out.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// segment

struct SegmentArgs {
  std::string image, superpixels = "grid:108", mode = "scribble", ann, sigma = "single:0.1", features = "color+texture";
  std::optional<double> looseness;
  std::optional<std::string> gt, out_mask, out_report;
};

SigmaStrategy parse_sigma(const std::string& s) {
  if (s == "self") return SelfTuning{};
  if (s == "best") return BestSigma{};
  if (s.rfind("single:", 0) == 0) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s.substr(7), &used);
      if (used == s.size() - 7 && v > 0) return SingleSigma{v};
    } catch (const std::exception&) {
    }
  }
  throw ParseError("--sigma must be self, best or single:<positive value>");
}

// Accepts a full annotation object, or the bare shape the mode implies:
// {"fg": ..., "bg": ...} for scribbles, {"box": [...]} or [x0,y0,x1,y1] for boxes.
Annotation parse_segment_annotation(const Json& j, const std::string& mode, std::optional<double> looseness) {
  if (mode == "scribble" || mode == "scribble-et") {
    auto s = j.is_object() && j.contains("type") ? annotation_from_json(j) : Annotation(scribble_from_json(j));
    if (!std::holds_alternative<Scribble>(s)) throw ParseError("mode " + mode + " needs a scribble annotation");
    return s;
  }
  Box b;
  if (j.is_array())
    b = box_from_json(j);
  else if (j.is_object() && j.contains("type")) {
    const auto a = annotation_from_json(j);
    if (const auto* bx = std::get_if<Box>(&a))
      b = *bx;
    else if (const auto* lb = std::get_if<LooseBox>(&a)) {
      if (!looseness) return a;
      b = lb->box;
    } else
      throw ParseError("mode bbox needs a box annotation");
  } else
    b = box_from_json(detail::field(j, "box"));
  if (looseness) return LooseBox{b, *looseness};
  return b;
}

int run_segment(const SegmentArgs& a) {
  if (a.mode != "scribble" && a.mode != "scribble-et" && a.mode != "bbox")
    throw ParseError("--mode must be scribble, scribble-et or bbox");
  if (a.looseness && a.mode != "bbox") throw ParseError("--looseness applies to bbox mode only");
  Diagnostics diag;
  const auto image = load_image(a.image);
  const auto sp = superpixels_for(a.superpixels, image, &diag);
  const auto features = compute_region_features(image, sp, detail::texture_flag(Json{{"features", a.features}}));
  const auto ann = parse_segment_annotation(read_json_file(a.ann), a.mode, a.looseness);
  const auto strategy = parse_sigma(a.sigma);

  std::optional<SegmentationMask> gt;
  if (a.gt) gt = load_mask(*a.gt);
  if (std::holds_alternative<BestSigma>(strategy) && !gt) throw ParseError("--sigma best needs --gt");
  SegmentConfig cfg;
  cfg.extraction.replicator.record_trace = false;
  cfg.ground_truth = gt ? &*gt : nullptr;

  SegmentResult res;
  if (a.mode == "scribble-et") {
    const auto& s = std::get<Scribble>(ann);
    res = segment_error_tolerant(sp, features, s.fg, s.bg, strategy, cfg);
  } else {
    res = segment(sp, features, ann, strategy, cfg);
  }
  if (a.out_mask) save_mask(*a.out_mask, res.mask);
  auto report = segment_result_to_json(res);
  report["annotation"] = annotation_to_json(ann);
  report["regions"] = sp.region_count();
  for (const auto& w : diag.warnings) report["warnings"].push_back(w);
  if (gt) report["metrics"] = metrics_to_json(evaluate(res.mask, *gt, res.box));
  if (a.out_report) write_text(*a.out_report, report.dump(2) + "\n");
  std::cerr << "foreground pixels: " << res.mask.count() << (res.flagged ? " (flagged)" : "") << "\n";
  for (const auto& w : report["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// coseg

struct CosegArgs {
  std::string images, superpixels = "grid:80", objectness = "builtin", run_output = "best", out_dir;
  std::optional<std::string> scribbles, descriptors;
};

int run_coseg(const CosegArgs& a) {
  const auto paths = split(a.images, ',');
  if (paths.size() < 2) throw ParseError("--images needs at least two comma-separated paths");
  std::vector<cv::Mat> images;
  std::vector<SuperpixelMap> maps;
  Diagnostics diag;
  const auto sp_specs = split(a.superpixels, ',');
  if (sp_specs.size() != 1 && sp_specs.size() != paths.size())
    throw ParseError("--superpixels takes one grid:N or one label image per input");
  for (Index k = 0; k < paths.size(); ++k) {
    images.push_back(load_image(paths[k]));
    maps.push_back(superpixels_for(sp_specs.size() == 1 ? sp_specs[0] : sp_specs[k], images.back(), &diag));
  }

  CosegConfig cfg;
  cfg.extraction.replicator.record_trace = false;
  apply_coseg_options(cfg, {{"run_output", a.run_output}});
  if (a.objectness == "builtin" || a.objectness == "geodesic") {
    apply_coseg_options(cfg, {{"objectness", a.objectness}});
  } else {
    // A directory with <image stem>.csv, one P_f per region.
    for (Index k = 0; k < paths.size(); ++k)
      cfg.objectness.push_back(
          load_objectness((fs::path(a.objectness) / (fs::path(paths[k]).stem().string() + ".csv")).string(),
                          maps[k].region_count()));
  }
  if (a.descriptors) {
    for (const auto& p : paths)
      cfg.descriptors.push_back(
          io::read_feature_csv_file((fs::path(*a.descriptors) / (fs::path(p).stem().string() + ".csv")).string()));
  }

  CosegResult res;
  if (a.scribbles)
    res = coseg_interactive(images, maps, coseg_scribbles_from_json(read_json_file(*a.scribbles), images.size()), cfg);
  else
    res = coseg_unsupervised(images, maps, cfg);

  fs::create_directories(a.out_dir);
  const auto summary = coseg_result_to_json(res, maps);
  for (Index k = 0; k < paths.size(); ++k) {
    const auto stem = fs::path(paths[k]).stem().string();
    save_mask((fs::path(a.out_dir) / (stem + "-mask.png")).string(), res.masks[k]);
    auto j = summary["images"][k];
    j["source"] = paths[k];
    write_text((fs::path(a.out_dir) / (stem + "-regions.json")).string(), j.dump(2) + "\n");
  }
  Json runs = summary["runs"];
  write_text((fs::path(a.out_dir) / "coseg.json").string(),
             Json{{"images", paths}, {"runs", runs}, {"flagged", res.flagged}, {"warnings", summary["warnings"]}}.dump(2) +
                 "\n");
  for (Index k = 0; k < paths.size(); ++k)
    std::cerr << paths[k] << ": " << res.masks[k].count() << " foreground pixels\n";
  if (res.flagged) std::cerr << "flagged: no common foreground\n";
  return 0;
}

// ---------------------------------------------------------------------------
// bench

int run_bench(const std::string& manifest, const std::string& out) {
  const auto r = run_benchmark_file(manifest);
  write_report(r, out);
  const auto m = r.mean();
  std::fprintf(stderr, "%zu cases, %zu failed; mean J %.4f, DSC %.4f, error rate %.4f, F %.4f\n", r.cases.size(),
               static_cast<std::size_t>(r.failed()), m.jaccard, m.dsc, m.error_rate, m.f_measure);
  return 0;
}

// ---------------------------------------------------------------------------
// serve

Service* running_service = nullptr;

int run_serve(const std::string& host, int port, const std::optional<std::string>& store, double max_upload_mb) {
  if (!(max_upload_mb > 0)) throw ParseError("--max-upload-mb must be positive");
  ServiceConfig cfg;
  if (store) cfg.store_dir = fs::path(*store);
  cfg.max_upload_bytes = static_cast<std::size_t>(max_upload_mb * 1024 * 1024);
  Service service(cfg);
  running_service = &service;
  std::signal(SIGINT, [](int) { running_service->stop(); });
  std::signal(SIGTERM, [](int) { running_service->stop(); });
  std::cerr << "listening on " << host << ":" << port << " (" << service.session_count() << " stored sessions)\n";
  if (!service.listen(host, port)) {
    std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained dominant-set clustering and image segmentation"};
  app.require_subcommand(1);

  ExtractArgs ea;
  auto* ex = app.add_subcommand("extract", "Extract constrained dominant sets from a graph file");
  ex->add_option("--graph", ea.graph, "Dense or edge-list graph file")->required();
  ex->add_option("--constraints", ea.constraints, "Comma-separated 0-based vertices")->required();
  auto* alpha = ex->add_option("--alpha", ea.alpha, "Fixed regularization weight");
  ex->add_option("--alpha-margin", ea.alpha_margin, "Margin added to lambda_max")->excludes(alpha);
  ex->add_option("--tol", ea.tol, "Replicator convergence tolerance");
  ex->add_option("--max-iters", ea.max_iters, "Replicator iteration budget");
  ex->add_option("--multi-start", ea.multi_start, "Enumerate local solutions from k start points");
  ex->add_option("--seed", ea.seed, "Seed for multi-start points");
  ex->add_option("--out", ea.out, "Output JSON path (- for stdout)");

  SegmentArgs sa;
  auto* seg = app.add_subcommand("segment", "Segment one image from scribbles or a box");
  seg->add_option("--image", sa.image)->required();
  seg->add_option("--superpixels", sa.superpixels, "Label PNG or grid:N");
  seg->add_option("--mode", sa.mode)->check(CLI::IsMember({"scribble", "scribble-et", "bbox"}));
  seg->add_option("--ann", sa.ann, "Annotation JSON file")->required();
  seg->add_option("--looseness", sa.looseness, "Box looseness in percent (bbox mode)");
  seg->add_option("--sigma", sa.sigma, "self | single:<v> | best");
  seg->add_option("--features", sa.features)->check(CLI::IsMember({"color", "color+texture"}));
  seg->add_option("--gt", sa.gt, "Ground-truth mask: enables metrics and --sigma best");
  seg->add_option("--out-mask", sa.out_mask);
  seg->add_option("--out-report", sa.out_report);

  CosegArgs ca;
  auto* co = app.add_subcommand("coseg", "Co-segment a set of images");
  co->add_option("--images", ca.images, "Comma-separated PNG paths")->required();
  co->add_option("--scribbles", ca.scribbles, "JSON list with one scribble object or null per image");
  co->add_option("--superpixels", ca.superpixels, "grid:N or comma-separated label PNGs");
  co->add_option("--descriptors", ca.descriptors, "Directory of <image stem>.csv region descriptors");
  co->add_option("--objectness", ca.objectness, "builtin | geodesic | directory of <image stem>.csv");
  co->add_option("--run-output", ca.run_output)->check(CLI::IsMember({"best", "first", "union"}));
  co->add_option("--out-dir", ca.out_dir)->required();

  std::string manifest, bench_out;
  auto* be = app.add_subcommand("bench", "Run a benchmark manifest");
  be->add_option("--manifest", manifest)->required();
  be->add_option("--out", bench_out, "Report directory")->required();

  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::string> store;
  double max_upload_mb = 32;
  auto* sv = app.add_subcommand("serve", "Run the HTTP session service");
  sv->add_option("--host", host);
  sv->add_option("--port", port)->envname("CDS_PORT");
  sv->add_option("--store-dir", store)->envname("CDS_STORE");
  sv->add_option("--max-upload-mb", max_upload_mb);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ex) return run_extract(ea);
    if (*seg) return run_segment(sa);
    if (*co) return run_coseg(ca);
    if (*be) return run_bench(manifest, bench_out);
    if (*sv) return run_serve(host, port, store, max_upload_mb);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
