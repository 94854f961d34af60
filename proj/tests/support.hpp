#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "airway_crowd/annotation.hpp"
#include "airway_crowd/qc.hpp"

namespace testsupport {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "ac") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline airway_crowd::Ellipse circle(double cx, double cy, double r, bool adjusted = true) {
  return airway_crowd::Ellipse{cx, cy, r, r, 0.0, adjusted, airway_crowd::KindHint::Unspecified};
}

inline airway_crowd::AnnotationRecord record(std::string id, std::string image,
                                             std::vector<airway_crowd::Ellipse> ellipses,
                                             std::string worker = "w1") {
  airway_crowd::AnnotationRecord r;
  r.annotation_id = std::move(id);
  r.image_id = std::move(image);
  r.worker_id = std::move(worker);
  r.hit_id = "hit-0001";
  r.submitted_at = "2016-06-01T12:00:00.000Z";
  r.ellipses = std::move(ellipses);
  return r;
}

}  // namespace testsupport
