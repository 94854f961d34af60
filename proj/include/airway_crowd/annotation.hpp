#pragma once

// Annotation data model and its newline-delimited JSON encoding.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "airway_crowd/errors.hpp"

namespace airway_crowd {

using json = nlohmann::json;

enum class KindHint { Unspecified, Lumen, Wall };

constexpr std::string_view to_string(KindHint k) {
  switch (k) {
    case KindHint::Lumen: return "lumen";
    case KindHint::Wall: return "wall";
    case KindHint::Unspecified: return "unspecified";
  }
  return "unspecified";
}

inline KindHint parse_kind_hint(std::string_view s) {
  if (s == "lumen") return KindHint::Lumen;
  if (s == "wall") return KindHint::Wall;
  if (s == "unspecified") return KindHint::Unspecified;
  throw ValidationError("unknown kind_hint '" + std::string(s) + "'");
}

/// Ellipse in image-pixel coordinates (origin top-left).
struct Ellipse {
  double cx{0.0};
  double cy{0.0};
  double rx{1.0};
  double ry{1.0};
  double theta{0.0};      // rotation of the rx axis, radians in [0, pi)
  bool adjusted{false};   // worker modified the default-spawned ellipse
  KindHint kind_hint{KindHint::Unspecified};

  bool operator==(const Ellipse&) const = default;
};

/// Wraps any finite angle into [0, pi); an ellipse is symmetric under rotation by pi.
inline double wrap_theta(double theta) {
  double t = std::fmod(theta, std::numbers::pi);
  if (t < 0.0) t += std::numbers::pi;
  if (t >= std::numbers::pi) t = 0.0;
  return t;
}

inline void validate(const Ellipse& e) {
  if (!std::isfinite(e.cx) || !std::isfinite(e.cy)) {
    throw ValidationError("ellipse centre must be finite");
  }
  if (!(e.rx > 0.0) || !(e.ry > 0.0) || !std::isfinite(e.rx) || !std::isfinite(e.ry)) {
    throw ValidationError("ellipse radii must be positive and finite");
  }
  if (!std::isfinite(e.theta)) throw ValidationError("ellipse theta must be finite");
}

/// Analytic ellipse area, pi * rx * ry; independent of centre and rotation.
inline double ellipse_area(const Ellipse& e) {
  if (!(e.rx > 0.0) || !(e.ry > 0.0)) throw ValidationError("ellipse radii must be positive");
  return std::numbers::pi * e.rx * e.ry;
}

struct AnnotationRecord {
  std::string annotation_id;
  std::string image_id;
  std::string worker_id;
  std::string hit_id;
  std::string submitted_at;  // RFC 3339, UTC
  std::vector<Ellipse> ellipses;

  bool operator==(const AnnotationRecord&) const = default;
};

// ---------------------------------------------------------------------------
// Timestamps

inline std::string format_rfc3339(std::chrono::system_clock::time_point tp) {
  const auto secs = std::chrono::time_point_cast<std::chrono::seconds>(tp);
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(tp - secs).count();
  const std::time_t t = std::chrono::system_clock::to_time_t(secs);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof(out), "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

inline std::string now_rfc3339() { return format_rfc3339(std::chrono::system_clock::now()); }

/// Accepts `YYYY-MM-DDTHH:MM:SS[.fff...]Z`.
inline bool is_rfc3339_utc(std::string_view s) {
  auto digits = [&](std::size_t pos, std::size_t n) {
    if (pos + n > s.size()) return false;
    for (std::size_t i = pos; i < pos + n; ++i) {
      if (s[i] < '0' || s[i] > '9') return false;
    }
    return true;
  };
  if (s.size() < 20) return false;
  if (!digits(0, 4) || s[4] != '-' || !digits(5, 2) || s[7] != '-' || !digits(8, 2) ||
      (s[10] != 'T' && s[10] != 't') || !digits(11, 2) || s[13] != ':' || !digits(14, 2) ||
      s[16] != ':' || !digits(17, 2)) {
    return false;
  }
  std::size_t pos = 19;
  if (s[pos] == '.') {
    ++pos;
    const std::size_t start = pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    if (pos == start) return false;
  }
  return pos + 1 == s.size() && (s[pos] == 'Z' || s[pos] == 'z');
}

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const Ellipse& e) {
  return json{{"cx", e.cx},
              {"cy", e.cy},
              {"rx", e.rx},
              {"ry", e.ry},
              {"theta", e.theta},
              {"adjusted", e.adjusted},
              {"kind_hint", std::string(to_string(e.kind_hint))}};
}

namespace detail {

inline double number_field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number()) {
    throw ValidationError(std::string("ellipse field '") + key + "' must be a number");
  }
  return it->get<double>();
}

inline std::string string_field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw ValidationError(std::string("field '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

}  // namespace detail

/// Strict ellipse decoding: numeric geometry, boolean `adjusted`; kind_hint optional.
inline Ellipse ellipse_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("ellipse must be a JSON object");
  Ellipse e;
  e.cx = detail::number_field(j, "cx");
  e.cy = detail::number_field(j, "cy");
  e.rx = detail::number_field(j, "rx");
  e.ry = detail::number_field(j, "ry");
  e.theta = j.contains("theta") ? detail::number_field(j, "theta") : 0.0;
  const auto adj = j.find("adjusted");
  if (adj == j.end() || !adj->is_boolean()) {
    throw ValidationError("ellipse field 'adjusted' must be a boolean");
  }
  e.adjusted = adj->get<bool>();
  if (const auto k = j.find("kind_hint"); k != j.end()) {
    if (!k->is_string()) throw ValidationError("ellipse field 'kind_hint' must be a string");
    e.kind_hint = parse_kind_hint(k->get<std::string>());
  }
  validate(e);
  e.theta = wrap_theta(e.theta);
  return e;
}

inline json to_json(const AnnotationRecord& r) {
  json ellipses = json::array();
  for (const auto& e : r.ellipses) ellipses.push_back(to_json(e));
  // Key order is fixed by nlohmann's sorted object map, which keeps log lines stable.
  return json{{"annotation_id", r.annotation_id}, {"image_id", r.image_id},
              {"worker_id", r.worker_id},         {"hit_id", r.hit_id},
              {"submitted_at", r.submitted_at},   {"ellipses", std::move(ellipses)}};
}

inline AnnotationRecord annotation_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("annotation must be a JSON object");
  AnnotationRecord r;
  r.annotation_id = detail::string_field(j, "annotation_id");
  r.image_id = detail::string_field(j, "image_id");
  r.worker_id = detail::string_field(j, "worker_id");
  r.hit_id = detail::string_field(j, "hit_id");
  r.submitted_at = detail::string_field(j, "submitted_at");
  if (!is_rfc3339_utc(r.submitted_at)) {
    throw ValidationError("submitted_at is not an RFC 3339 UTC timestamp");
  }
  const auto it = j.find("ellipses");
  if (it == j.end() || !it->is_array()) throw ValidationError("'ellipses' must be an array");
  for (const auto& e : *it) r.ellipses.push_back(ellipse_from_json(e));
  return r;
}

inline std::string to_log_line(const AnnotationRecord& r) { return to_json(r).dump(); }

}  // namespace airway_crowd
