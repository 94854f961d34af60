#pragma once

// Self-hosted HTTP front end for the browser annotator.
//
//   GET  /api/hit?worker=ID          -> 200 {hit_id, image_ids, instructions_version} | 204
//   GET  /api/image/{image_id}.png   -> PNG bytes
//   POST /api/hit/{hit_id}/submit    -> 200 ack | 404 | 409 | 422
//   GET  /api/stats                  -> live counters
//   GET  /api/instructions           -> {version, text}

#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "airway_crowd/annotation.hpp"
#include "airway_crowd/errors.hpp"
#include "airway_crowd/png.hpp"
#include "airway_crowd/qc.hpp"
#include "airway_crowd/reslice.hpp"
#include "airway_crowd/task_store.hpp"
#include "airway_crowd/text.hpp"

namespace airway_crowd {

inline constexpr std::string_view kDefaultInstructions =
    "1. Find the airway: a dark circle with a light ring around it, near the centre.\n"
    "2. Click inside the dark hole to place an ellipse, then resize it to the hole's edge.\n"
    "3. Place a second ellipse and resize it to the outer edge of the light ring.\n"
    "4. If you see no airway, press 'No airway' (a small circle goes in the corner).\n";

struct ServerConfig {
  std::string host{"127.0.0.1"};
  int port{8080};  // 0 picks a free port
  std::filesystem::path data_dir;
  std::filesystem::path instructions_path;  // empty: data_dir/instructions.txt or built-in
  std::filesystem::path static_dir;         // empty: data_dir/ui when present
  HitConfig hit_config;
  QcConfig qc_config;

  std::filesystem::path manifest_path() const { return data_dir / "manifest.csv"; }
  std::filesystem::path hits_path() const { return data_dir / "hits.json"; }
  std::filesystem::path log_path() const { return data_dir / "annotations.jsonl"; }
  std::filesystem::path images_dir() const { return data_dir / "images"; }
};

inline std::string instructions_version(std::string_view text) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "v-%016llx",
                static_cast<unsigned long long>(text::fnv1a(text)));
  return buf;
}

class AnnotationServer {
 public:
  explicit AnnotationServer(ServerConfig config) : config_(std::move(config)) {
    const auto manifest = load_manifest(config_.manifest_path());
    if (manifest.empty()) throw ValidationError("manifest has no images");
    for (const auto& e : manifest) image_ids_.insert(e.image_id);
    auto hits = load_hit_manifest(config_.hits_path());
    for (const auto& h : hits) {
      for (const auto& img : h.image_ids) {
        if (image_ids_.count(img) == 0) {
          throw ValidationError("HIT " + h.hit_id + " references unknown image " + img);
        }
      }
    }
    store_ = std::make_unique<TaskStore>(std::move(hits), config_.hit_config, config_.log_path());

    auto ipath = config_.instructions_path;
    if (ipath.empty() && std::filesystem::exists(config_.data_dir / "instructions.txt")) {
      ipath = config_.data_dir / "instructions.txt";
    }
    if (!ipath.empty()) {
      const auto bytes = read_file(ipath);
      instructions_.assign(bytes.begin(), bytes.end());
    } else {
      instructions_ = std::string(kDefaultInstructions);
    }
    instructions_version_ = airway_crowd::instructions_version(instructions_);
    install_routes();
  }

  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  /// Binds the listening socket; returns the bound port.
  int bind() {
    if (config_.port == 0) {
      const int port = http_.bind_to_any_port(config_.host);
      if (port < 0) throw Error("cannot bind " + config_.host);
      bound_port_ = port;
    } else {
      if (!http_.bind_to_port(config_.host, config_.port)) {
        throw Error("cannot bind " + config_.host + ":" + std::to_string(config_.port));
      }
      bound_port_ = config_.port;
    }
    return bound_port_;
  }

  /// Serves until stop(); bind() must have succeeded.
  void serve() { http_.listen_after_bind(); }
  void stop() { http_.stop(); }
  void wait_until_ready() const { http_.wait_until_ready(); }

  int port() const { return bound_port_; }
  TaskStore& store() { return *store_; }
  const std::string& instructions_version() const { return instructions_version_; }

  json stats_json() const {
    const auto counts = store_->counts();
    QcTally tally;
    for (const auto& r : store_->all_annotations()) tally.add(classify(r, config_.qc_config));
    json per_image = json::object();
    for (const auto& img : image_ids_) {
      const auto it = counts.per_image.find(img);
      per_image[img] = it == counts.per_image.end() ? 0 : it->second;
    }
    return json{{"images_total", image_ids_.size()},
                {"annotations_total", counts.annotations_total},
                {"per_image_counts", per_image},
                {"qc_tally", tally.to_json()}};
  }

 private:
  static void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& msg) {
    send_json(res, status, json{{"error", msg}});
  }

  void install_routes() {
    http_.Get("/api/hit", [this](const httplib::Request& req, httplib::Response& res) {
      const auto worker = req.get_param_value("worker");
      if (worker.empty()) return send_error(res, 400, "missing worker parameter");
      const auto hit = store_->assign_hit(worker);
      if (!hit) {
        res.status = 204;
        return;
      }
      send_json(res, 200,
                json{{"hit_id", hit->hit_id},
                     {"image_ids", hit->image_ids},
                     {"instructions_version", instructions_version_}});
    });

    http_.Get(R"(/api/image/([^/]+)\.png)",
              [this](const httplib::Request& req, httplib::Response& res) {
                const std::string id = req.matches[1];
                if (image_ids_.count(id) == 0) return send_error(res, 404, "unknown image " + id);
                const auto path = config_.images_dir() / (id + ".png");
                try {
                  const auto bytes = read_file(path);
                  res.status = 200;
                  res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
                } catch (const NotFoundError&) {
                  send_error(res, 404, "image file missing for " + id);
                }
              });

    http_.Post(R"(/api/hit/([^/]+)/submit)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 handle_submit(req.matches[1], req.body, res);
               });

    http_.Get("/api/stats", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, stats_json());
    });

    http_.Get("/api/instructions", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, json{{"version", instructions_version_}, {"text", instructions_}});
    });

    auto static_dir = config_.static_dir;
    if (static_dir.empty() && std::filesystem::is_directory(config_.data_dir / "ui")) {
      static_dir = config_.data_dir / "ui";
    }
    if (!static_dir.empty()) http_.set_mount_point("/", static_dir.string());
  }

  void handle_submit(const std::string& hit_id, const std::string& body,
                     httplib::Response& res) {
    const auto hit = store_->find_hit(hit_id);
    if (!hit) return send_error(res, 404, "unknown HIT " + hit_id);

    json j;
    try {
      j = json::parse(body);
    } catch (const json::exception& e) {
      return send_error(res, 422, std::string("body is not valid JSON: ") + e.what());
    }

    std::string worker_id;
    SubmissionMeta meta;
    std::vector<AnnotationRecord> records;
    try {
      if (!j.is_object()) throw ValidationError("body must be a JSON object");
      worker_id = detail::string_field(j, "worker_id");
      if (worker_id.empty()) throw ValidationError("worker_id must not be empty");
      if (j.contains("idempotency_key")) meta.idempotency_key = detail::string_field(j, "idempotency_key");
      meta.instructions_version = j.contains("instructions_version")
                                      ? detail::string_field(j, "instructions_version")
                                      : instructions_version_;
      if (j.contains("client_info")) meta.client_info = detail::string_field(j, "client_info");
      const auto it = j.find("annotations");
      if (it == j.end() || !it->is_array()) throw ValidationError("'annotations' must be an array");
      const auto stamp = now_rfc3339();
      for (const auto& a : *it) {
        if (!a.is_object()) throw ValidationError("each annotation must be an object");
        AnnotationRecord r;
        r.image_id = detail::string_field(a, "image_id");
        r.submitted_at = stamp;
        const auto el = a.find("ellipses");
        if (el == a.end() || !el->is_array()) throw ValidationError("'ellipses' must be an array");
        for (const auto& e : *el) r.ellipses.push_back(ellipse_from_json(e));
        records.push_back(std::move(r));
      }
    } catch (const ValidationError& e) {
      return send_error(res, 422, e.what());
    } catch (const json::exception& e) {
      return send_error(res, 422, e.what());
    }

    try {
      const auto n = records.size();
      const auto outcome = store_->record_submission(hit_id, worker_id, std::move(records), meta);
      send_json(res, 200,
                json{{"status", "ok"},
                     {"hit_id", hit_id},
                     {"recorded", outcome == SubmitOutcome::Recorded ? n : 0},
                     {"replayed", outcome == SubmitOutcome::Replayed}});
    } catch (const ConflictError& e) {
      send_error(res, 409, e.what());
    } catch (const NotFoundError& e) {
      send_error(res, 404, e.what());
    } catch (const ValidationError& e) {
      send_error(res, 422, e.what());
    } catch (const Error& e) {
      send_error(res, 500, e.what());
    }
  }

  ServerConfig config_;
  std::set<std::string> image_ids_;
  std::unique_ptr<TaskStore> store_;
  std::string instructions_;
  std::string instructions_version_;
  httplib::Server http_;
  int bound_port_{-1};
};

}  // namespace airway_crowd
