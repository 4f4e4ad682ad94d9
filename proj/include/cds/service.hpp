#pragma once

// Session-oriented HTTP API over the segmentation and co-segmentation
// pipelines.
//
//   POST /sessions                  multipart upload: one or more "image" PNG
//                                   parts and an optional "config" JSON part
//   POST /sessions/{id}/annotations {"image": k, "annotation": {...},
//                                   "error_tolerant": bool, "strategy": {...},
//                                   "features": "color" | "color+texture"}
//   GET  /sessions/{id}             config, image shapes and the history
//   GET  /sessions/{id}/mask/{k}    latest mask of image k as PNG;
//                                   ?entry=n picks history entry n instead
//   POST /sessions/{id}/coseg       {"mode": "unsupervised" | "interactive",
//                                   "scribbles": [...], "objectness": ...,
//                                   "run_output": ...}
//
// Session config: {"superpixels": <grid target>, "features": ...,
// "strategy": {...}, "coseg": bool, "solver": {"convergence_tol",
// "max_iters", "kkt_tol"}}.
//
// Masks come back as {"width", "height", "foreground_pixels", "rle", "png"}
// with "png" base64-encoded. Requests on one session run one at a time.

#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <vector>

#include "cds/coseg.hpp"
#include "cds/features.hpp"
#include "cds/json_io.hpp"
#include "cds/mask.hpp"
#include "cds/segmentation.hpp"
#include "cds/superpixel.hpp"

// After the Eigen-based headers: <resolv.h>, pulled in here, defines `_res`.
#include <httplib.h>

namespace cds {

// An error with an HTTP status attached.
class HttpError : public Error {
public:
  HttpError(int status, const std::string& what) : Error(what), status(status) {}
  int status;
};

struct SessionConfig {
  Index superpixels = 108;
  bool texture = true;
  SigmaStrategy strategy = SingleSigma{};
  bool coseg = false;
  ReplicatorConfig solver = [] {
    ReplicatorConfig r;
    r.record_trace = false;
    return r;
  }();
};

inline SessionConfig session_config_from_json(const Json& j) {
  SessionConfig c;
  if (j.is_null()) return c;
  if (!j.is_object()) throw ParseError("session config must be a JSON object");
  if (j.contains("coseg")) c.coseg = detail::get_as<bool>(j.at("coseg"), "coseg");
  if (c.coseg) c.superpixels = 80;
  if (j.contains("superpixels")) {
    const auto n = detail::get_as<long long>(j.at("superpixels"), "superpixels");
    if (n < 1) throw ParseError("'superpixels' must be a positive grid target");
    c.superpixels = static_cast<Index>(n);
  }
  if (j.contains("features")) {
    const auto f = detail::get_as<std::string>(j.at("features"), "features");
    if (f != "color" && f != "color+texture") throw ParseError("unknown feature set '" + f + "'");
    c.texture = f == "color+texture";
  }
  if (j.contains("strategy")) c.strategy = strategy_from_json(j.at("strategy"));
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    if (!s.is_object()) throw ParseError("'solver' must be a JSON object");
    if (s.contains("convergence_tol")) c.solver.convergence_tol = detail::get_as<double>(s.at("convergence_tol"), "convergence_tol");
    if (s.contains("kkt_tol")) c.solver.kkt_tol = detail::get_as<double>(s.at("kkt_tol"), "kkt_tol");
    if (s.contains("max_iters")) c.solver.max_iters = static_cast<Index>(detail::get_as<long long>(s.at("max_iters"), "max_iters"));
    if (!(c.solver.convergence_tol > 0) || !(c.solver.kkt_tol > 0) || c.solver.max_iters < 1)
      throw ParseError("solver tolerances and max_iters must be positive");
  }
  return c;
}

inline Json session_config_to_json(const SessionConfig& c) {
  return {{"superpixels", c.superpixels},
          {"features", c.texture ? "color+texture" : "color"},
          {"strategy", strategy_to_json(c.strategy)},
          {"coseg", c.coseg},
          {"solver",
           {{"convergence_tol", c.solver.convergence_tol},
            {"max_iters", c.solver.max_iters},
            {"kkt_tol", c.solver.kkt_tol}}}};
}

struct Session {
  std::string id;
  SessionConfig config;
  std::vector<cv::Mat> images;
  std::vector<SuperpixelMap> maps;
  // Keyed by (image, superpixel source, texture flag).
  std::map<std::tuple<Index, std::string, bool>, FeatureTable> features;
  std::vector<Json> history;  // append-only
  std::vector<std::optional<SegmentationMask>> latest;
  std::mutex mutex;

  std::string superpixel_source() const { return "grid:" + std::to_string(config.superpixels); }

  const FeatureTable& features_for(Index image, bool texture) {
    const auto key = std::make_tuple(image, superpixel_source(), texture);
    auto it = features.find(key);
    if (it == features.end())
      it = features.emplace(key, compute_region_features(images.at(image), maps.at(image), texture)).first;
    return it->second;
  }
};

namespace detail {

inline std::string random_session_id() {
  static std::mutex mu;
  static std::random_device rd;
  std::lock_guard lock(mu);
  std::string id;
  for (int k = 0; k < 4; ++k) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(rd()));
    id += buf;
  }
  return id;
}

inline bool valid_session_id(const std::string& id) {
  return id.size() == 32 && id.find_first_not_of("0123456789abcdef") == std::string::npos;
}

inline std::string png_base64(const SegmentationMask& m) {
  const auto bytes = encode_mask_png(m);
  return httplib::detail::base64_encode(std::string(bytes.begin(), bytes.end()));
}

inline Json parse_body(const std::string& body) {
  try {
    return Json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw HttpError(400, std::string("request body is not valid JSON: ") + e.what());
  }
}

inline void write_file(const std::filesystem::path& p, const std::string& bytes) {
  const auto tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + tmp);
    out << bytes;
  }
  std::filesystem::rename(tmp, p);
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw NotFound("cannot read " + p.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace detail

struct ServiceConfig {
  std::optional<std::filesystem::path> store_dir;  // write-through persistence
  std::size_t max_upload_bytes = 32u << 20;
};

class Service {
public:
  explicit Service(ServiceConfig cfg = {}) : cfg_(std::move(cfg)) {
    if (cfg_.store_dir) load_store();
    install_routes();
  }

  httplib::Server& server() { return server_; }

  bool listen(const std::string& host, int port) { return server_.listen(host, port); }
  int bind_any_port(const std::string& host = "127.0.0.1") { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }

  Index session_count() const {
    std::shared_lock lock(sessions_mutex_);
    return sessions_.size();
  }

  // ---------------------------------------------------------------------
  // Operations (the HTTP handlers are thin wrappers)

  std::string create_session(const std::vector<cv::Mat>& images, const Json& config = nullptr) {
    auto s = std::make_shared<Session>();
    s->config = session_config_from_json(config);
    if (images.empty()) throw HttpError(422, "a session needs at least one image");
    if (s->config.coseg && images.size() < 2) throw HttpError(422, "a co-segmentation session needs at least two images");
    for (const auto& img : images) {
      s->images.push_back(img);
      s->maps.push_back(grid_superpixels(img, s->config.superpixels));
    }
    for (Index k = 0; k < s->images.size(); ++k) s->features_for(k, s->config.texture);
    s->latest.resize(images.size());
    s->id = detail::random_session_id();
    persist(*s, true);
    std::unique_lock lock(sessions_mutex_);
    sessions_[s->id] = s;
    return s->id;
  }

  Json submit_annotation(const std::string& id, const Json& body) {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    if (!body.is_object()) throw HttpError(422, "annotation request must be a JSON object");
    Json result;
    try {
      const Index image = body.contains("image") ? static_cast<Index>(detail::get_as<long long>(body.at("image"), "image")) : 0;
      if (image >= s->images.size()) throw InvalidArgument("image index out of range");
      const auto ann = annotation_from_json(detail::field(body, "annotation"));
      const bool texture = body.contains("features") ? body.at("features") == "color+texture" : s->config.texture;
      if (body.contains("features") && body.at("features") != "color" && body.at("features") != "color+texture")
        throw ParseError("unknown feature set");
      const SigmaStrategy strategy = body.contains("strategy") ? strategy_from_json(body.at("strategy")) : s->config.strategy;
      const bool tolerant = body.value("error_tolerant", false);
      SegmentConfig cfg;
      cfg.extraction.replicator = s->config.solver;
      const auto& feats = s->features_for(image, texture);
      SegmentResult res;
      if (tolerant) {
        const auto* sc = std::get_if<Scribble>(&ann);
        if (!sc) throw ParseError("error-tolerant mode needs a scribble annotation");
        res = segment_error_tolerant(s->maps[image], feats, sc->fg, sc->bg, strategy, cfg);
      } else {
        res = segment(s->maps[image], feats, ann, strategy, cfg);
      }
      result = segment_result_to_json(res);
      result["image"] = image;
      s->latest[image] = res.mask;
    } catch (const ParseError& e) {
      throw HttpError(422, e.what());
    } catch (const InvalidArgument& e) {
      throw HttpError(422, e.what());
    }
    return append(*s, "annotation", body, std::move(result));
  }

  Json run_coseg(const std::string& id, const Json& body) {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    if (!s->config.coseg) throw HttpError(409, "session was not created for co-segmentation");
    Json result;
    try {
      if (!body.is_object()) throw ParseError("co-segmentation request must be a JSON object");
      CosegConfig cfg;
      cfg.extraction.replicator = s->config.solver;
      cfg.extraction.replicator.max_iters = std::min(cfg.extraction.replicator.max_iters, detail::coseg_extraction().replicator.max_iters);
      apply_coseg_options(cfg, body);
      const auto mode = body.value("mode", std::string("unsupervised"));
      CosegResult res;
      if (mode == "unsupervised")
        res = coseg_unsupervised(s->images, s->maps, cfg);
      else if (mode == "interactive")
        res = coseg_interactive(s->images, s->maps, coseg_scribbles_from_json(detail::field(body, "scribbles"), s->images.size()), cfg);
      else
        throw ParseError("unknown co-segmentation mode '" + mode + "'");
      result = coseg_result_to_json(res, s->maps);
      for (Index k = 0; k < res.masks.size(); ++k) s->latest[k] = res.masks[k];
    } catch (const ParseError& e) {
      throw HttpError(422, e.what());
    } catch (const InvalidArgument& e) {
      throw HttpError(422, e.what());
    }
    return append(*s, "coseg", body, std::move(result));
  }

  Json state(const std::string& id) {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    Json images = Json::array();
    for (Index k = 0; k < s->images.size(); ++k)
      images.push_back({{"width", s->images[k].cols},
                        {"height", s->images[k].rows},
                        {"regions", s->maps[k].region_count()},
                        {"has_mask", s->latest[k].has_value()}});
    return {{"id", s->id}, {"config", session_config_to_json(s->config)}, {"images", images}, {"history", s->history}};
  }

  std::vector<std::uint8_t> mask_png(const std::string& id, Index image, std::optional<Index> entry = std::nullopt) {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    if (image >= s->images.size()) throw HttpError(404, "no image " + std::to_string(image));
    if (!entry) {
      if (!s->latest[image]) throw HttpError(404, "image " + std::to_string(image) + " has no mask yet");
      return encode_mask_png(*s->latest[image]);
    }
    if (*entry >= s->history.size()) throw HttpError(404, "no history entry " + std::to_string(*entry));
    const auto m = entry_mask(s->history[*entry], image);
    if (!m) throw HttpError(404, "history entry " + std::to_string(*entry) + " has no mask for image " + std::to_string(image));
    return encode_mask_png(*m);
  }

private:
  std::shared_ptr<Session> find(const std::string& id) {
    std::shared_lock lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw HttpError(404, "unknown session '" + id + "'");
    return it->second;
  }

  // History entries hold the request and the result with masks as RLE; the
  // response additionally carries the PNGs.
  Json append(Session& s, const std::string& kind, const Json& request, Json result) {
    Json entry{{"index", s.history.size()}, {"kind", kind}, {"request", request}, {"result", result}};
    s.history.push_back(entry);
    persist(s, false);
    Json response = std::move(result);
    response["index"] = entry["index"];
    if (kind == "annotation") {
      response["mask"]["png"] = detail::png_base64(mask_from_json(response["mask"]));
    } else {
      for (auto& img : response["images"]) img["mask"]["png"] = detail::png_base64(mask_from_json(img["mask"]));
    }
    return response;
  }

  static std::optional<SegmentationMask> entry_mask(const Json& entry, Index image) {
    const auto& r = entry.at("result");
    if (entry.at("kind") == "annotation") {
      if (r.at("image").get<Index>() != image) return std::nullopt;
      return mask_from_json(r.at("mask"));
    }
    if (image >= r.at("images").size()) return std::nullopt;
    return mask_from_json(r.at("images").at(image).at("mask"));
  }

  // ---------------------------------------------------------------------
  // Write-through store: <store>/<id>/session.json, image-<k>.png and
  // mask-<entry>-<k>.png.

  void persist(const Session& s, bool with_images) {
    if (!cfg_.store_dir) return;
    const auto dir = *cfg_.store_dir / s.id;
    std::filesystem::create_directories(dir);
    if (with_images) {
      for (Index k = 0; k < s.images.size(); ++k) {
        const auto bytes = encode_png(s.images[k]);
        detail::write_file(dir / ("image-" + std::to_string(k) + ".png"), std::string(bytes.begin(), bytes.end()));
      }
    }
    if (!s.history.empty()) {
      const auto& e = s.history.back();
      for (Index k = 0; k < s.images.size(); ++k)
        if (const auto m = entry_mask(e, k)) {
          const auto bytes = encode_mask_png(*m);
          detail::write_file(dir / ("mask-" + std::to_string(s.history.size() - 1) + "-" + std::to_string(k) + ".png"),
                             std::string(bytes.begin(), bytes.end()));
        }
    }
    const Json doc{{"id", s.id},
                   {"config", session_config_to_json(s.config)},
                   {"images", s.images.size()},
                   {"history", s.history}};
    detail::write_file(dir / "session.json", doc.dump(1));
  }

  void load_store() {
    std::filesystem::create_directories(*cfg_.store_dir);
    for (const auto& d : std::filesystem::directory_iterator(*cfg_.store_dir)) {
      if (!d.is_directory() || !detail::valid_session_id(d.path().filename().string())) continue;
      try {
        const auto doc = Json::parse(detail::read_file(d.path() / "session.json"));
        auto s = std::make_shared<Session>();
        s->id = doc.at("id").get<std::string>();
        s->config = session_config_from_json(doc.at("config"));
        const auto n = doc.at("images").get<Index>();
        for (Index k = 0; k < n; ++k) {
          s->images.push_back(load_image((d.path() / ("image-" + std::to_string(k) + ".png")).string()));
          s->maps.push_back(grid_superpixels(s->images.back(), s->config.superpixels));
        }
        s->latest.resize(n);
        for (const auto& e : doc.at("history")) {
          s->history.push_back(e);
          for (Index k = 0; k < n; ++k)
            if (auto m = entry_mask(e, k)) s->latest[k] = std::move(m);
        }
        sessions_[s->id] = s;
      } catch (const std::exception& e) {
        std::cerr << "skipping stored session " << d.path() << ": " << e.what() << "\n";
      }
    }
  }

  // ---------------------------------------------------------------------
  // HTTP

  template <class F>
  static void guarded(httplib::Response& res, F&& f) {
    auto fail = [&](int status, const std::string& msg) {
      res.status = status;
      res.set_content(Json{{"error", msg}}.dump(), "application/json");
    };
    try {
      f();
    } catch (const HttpError& e) {
      fail(e.status, e.what());
    } catch (const ParseError& e) {
      fail(422, e.what());
    } catch (const InvalidArgument& e) {
      fail(422, e.what());
    } catch (const NotFound& e) {
      fail(404, e.what());
    } catch (const std::exception& e) {
      fail(500, e.what());
    }
  }

  static void reply(httplib::Response& res, const Json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
  }

  void install_routes() {
    server_.set_payload_max_length(cfg_.max_upload_bytes);

    server_.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        if (!req.is_multipart_form_data()) throw HttpError(415, "expected multipart/form-data with 'image' parts");
        std::vector<cv::Mat> images;
        const auto range = req.files.equal_range("image");
        for (auto it = range.first; it != range.second; ++it) {
          const auto& c = it->second.content;
          try {
            images.push_back(decode_image(std::vector<std::uint8_t>(c.begin(), c.end())));
          } catch (const Error& e) {
            throw HttpError(422, "image part " + std::to_string(images.size()) + ": " + e.what());
          }
        }
        Json config = nullptr;
        if (req.has_file("config")) config = detail::parse_body(req.get_file_value("config").content);
        const auto id = create_session(images, config);
        reply(res, state(id), 201);
      });
    });

    server_.Post(R"(/sessions/([0-9a-f]{32})/annotations)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, submit_annotation(req.matches[1], detail::parse_body(req.body))); });
    });

    server_.Post(R"(/sessions/([0-9a-f]{32})/coseg)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, run_coseg(req.matches[1], detail::parse_body(req.body))); });
    });

    server_.Get(R"(/sessions/([0-9a-f]{32}))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, state(req.matches[1])); });
    });

    server_.Get(R"(/sessions/([0-9a-f]{32})/mask/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        std::optional<Index> entry;
        if (req.has_param("entry")) {
          const auto v = req.get_param_value("entry");
          if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos || v.size() > 9)
            throw HttpError(422, "'entry' must be a history index");
          entry = std::stoul(v);
        }
        const auto k = std::string(req.matches[2]);
        if (k.size() > 9) throw HttpError(404, "no image " + k);
        const auto png = mask_png(req.matches[1], std::stoul(k), entry);
        res.set_content(std::string(png.begin(), png.end()), "image/png");
      });
    });

    // Anything else under /sessions, including malformed ids.
    server_.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) {
        const char* msg = res.status == 413 ? "upload exceeds the configured limit" : "not found";
        res.set_content(Json{{"error", msg}}.dump(), "application/json");
      }
    });
  }

  ServiceConfig cfg_;
  httplib::Server server_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace cds
