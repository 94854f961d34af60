#pragma once

// HIT packaging, assignment and the durable append-only annotation log.

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "airway_crowd/annotation.hpp"
#include "airway_crowd/errors.hpp"

namespace airway_crowd {

struct HitConfig {
  int images_per_hit{10};
  std::string reward_label{"$0.10"};  // informational only
  int annotations_per_image_target{10};
  std::uint64_t shuffle_seed{0};

  void validate() const {
    if (images_per_hit < 1) throw ValidationError("images_per_hit must be >= 1");
    if (annotations_per_image_target < 1) {
      throw ValidationError("annotations_per_image_target must be >= 1");
    }
  }
};

struct Hit {
  std::string hit_id;
  std::vector<std::string> image_ids;

  bool operator==(const Hit&) const = default;
};

inline std::string make_hit_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "hit-%04zu", index + 1);
  return buf;
}

/// Shuffles image ids with the configured seed and chunks them; the last HIT may be short.
inline std::vector<Hit> make_hits(const std::vector<std::string>& image_ids,
                                  const HitConfig& config) {
  config.validate();
  if (image_ids.empty()) throw ValidationError("make_hits: no images");
  {
    std::set<std::string> seen;
    for (const auto& id : image_ids) {
      if (!seen.insert(id).second) throw ValidationError("make_hits: duplicate image id " + id);
    }
  }
  std::vector<std::string> shuffled = image_ids;
  std::mt19937_64 rng(config.shuffle_seed);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  std::vector<Hit> hits;
  const auto per = static_cast<std::size_t>(config.images_per_hit);
  for (std::size_t start = 0; start < shuffled.size(); start += per) {
    Hit h;
    h.hit_id = make_hit_id(hits.size());
    const auto end = std::min(start + per, shuffled.size());
    h.image_ids.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(start),
                       shuffled.begin() + static_cast<std::ptrdiff_t>(end));
    hits.push_back(std::move(h));
  }
  return hits;
}

/// HIT manifest: `{"hit-0001": ["img", ...], ...}`.
inline void write_hit_manifest(const std::vector<Hit>& hits, const std::filesystem::path& path) {
  json j = json::object();
  for (const auto& h : hits) j[h.hit_id] = h.image_ids;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline std::vector<Hit> load_hit_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open HIT manifest: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw FormatError(path.string() + ": HIT manifest must be an object");
  std::vector<Hit> hits;
  for (const auto& [id, images] : j.items()) {
    if (!images.is_array()) throw FormatError("HIT " + id + ": image list must be an array");
    Hit h{id, {}};
    for (const auto& img : images) {
      if (!img.is_string()) throw FormatError("HIT " + id + ": image ids must be strings");
      h.image_ids.push_back(img.get<std::string>());
    }
    hits.push_back(std::move(h));
  }
  return hits;
}

// ---------------------------------------------------------------------------
// Annotation log

/// Reads a newline-delimited JSON annotation log. With `allow_torn_tail`, a final
/// line lacking its newline is ignored instead of rejected.
inline std::vector<AnnotationRecord> read_annotation_log(const std::filesystem::path& path,
                                                         bool allow_torn_tail = false) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open annotation log: " + path.string());
  const std::string content((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
  std::vector<AnnotationRecord> out;
  std::size_t start = 0;
  std::size_t lineno = 0;
  while (start < content.size()) {
    ++lineno;
    const auto nl = content.find('\n', start);
    if (nl == std::string::npos && allow_torn_tail) break;
    const auto end = nl == std::string::npos ? content.size() : nl;
    const std::string_view line(content.data() + start, end - start);
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(annotation_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void write_annotation_log(const std::vector<AnnotationRecord>& records,
                                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& r : records) out << to_log_line(r) << '\n';
}

namespace detail {

/// Append-only file handle; each append is a single write loop followed by fsync.
class DurableAppender {
 public:
  explicit DurableAppender(const std::filesystem::path& path) : path_(path) {
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error("cannot open " + path.string() + ": " + std::strerror(errno));
  }
  DurableAppender(const DurableAppender&) = delete;
  DurableAppender& operator=(const DurableAppender&) = delete;
  DurableAppender(DurableAppender&& o) noexcept : path_(std::move(o.path_)), fd_(o.fd_) {
    o.fd_ = -1;
  }
  DurableAppender& operator=(DurableAppender&&) = delete;
  ~DurableAppender() {
    if (fd_ >= 0) ::close(fd_);
  }

  /// On failure the file is truncated back to its previous length.
  void append(std::string_view bytes) {
    const auto before = ::lseek(fd_, 0, SEEK_END);
    auto fail = [&](const char* what) {
      const std::string msg = std::string(what) + " " + path_.string() + ": " + std::strerror(errno);
      if (before >= 0 && ::ftruncate(fd_, before) == 0) ::fsync(fd_);
      throw Error(msg);
    };
    while (!bytes.empty()) {
      const auto n = ::write(fd_, bytes.data(), bytes.size());
      if (n < 0) {
        if (errno == EINTR) continue;
        fail("write to");
      }
      bytes.remove_prefix(static_cast<std::size_t>(n));
    }
    if (::fsync(fd_) != 0) fail("fsync of");
  }

 private:
  std::filesystem::path path_;
  int fd_{-1};
};

inline void fsync_path(const std::filesystem::path& p) {
  const int fd = ::open(p.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
}

/// Replaces `path` with `content` via write-to-temp + rename.
inline void atomic_rewrite(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  std::filesystem::remove(tmp);
  {
    DurableAppender out(tmp);
    out.append(content);
  }
  std::filesystem::rename(tmp, path);
  fsync_path(path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

}  // namespace detail

/// Per-submission metadata kept beside the annotation log.
struct SubmissionMeta {
  std::string idempotency_key;
  std::string instructions_version;
  std::string client_info;
};

enum class SubmitOutcome { Recorded, Replayed };

struct StoreCounts {
  std::size_t images_total{0};
  std::size_t annotations_total{0};
  std::map<std::string, std::size_t> per_image;
};

/// HIT assignment plus durable storage of submissions.
///
/// Writers serialize on an exclusive lock; a submission's records reach disk in a
/// single append + fsync before the call returns, so readers see either all of a
/// HIT's records or none of them.
class TaskStore {
 public:
  TaskStore(std::vector<Hit> hits, HitConfig config, std::filesystem::path log_path)
      : hits_(std::move(hits)), config_(std::move(config)), log_path_(std::move(log_path)) {
    config_.validate();
    for (std::size_t i = 0; i < hits_.size(); ++i) {
      const auto& h = hits_[i];
      if (!hit_index_.emplace(h.hit_id, i).second) {
        throw ValidationError("duplicate hit id " + h.hit_id);
      }
      std::set<std::string> within;
      for (const auto& img : h.image_ids) {
        if (!within.insert(img).second) {
          throw ValidationError("HIT " + h.hit_id + " lists image " + img + " twice");
        }
        image_hits_[img].push_back(h.hit_id);
        by_image_.try_emplace(img);
      }
    }
    recover();
    appender_.emplace(log_path_);
    meta_appender_.emplace(meta_path());
  }

  const std::vector<Hit>& hits() const { return hits_; }
  const HitConfig& config() const { return config_; }
  const std::filesystem::path& log_path() const { return log_path_; }
  std::filesystem::path meta_path() const {
    auto p = log_path_;
    p.replace_filename("submissions.jsonl");
    return p;
  }

  std::optional<Hit> find_hit(const std::string& hit_id) const {
    const auto it = hit_index_.find(hit_id);
    if (it == hit_index_.end()) return std::nullopt;
    return hits_[it->second];
  }

  bool has_image(const std::string& image_id) const { return by_image_.count(image_id) != 0; }

  /// Next HIT for a worker: not yet submitted by them, containing an image below the
  /// target. Prefers the HIT whose least-annotated image has the fewest annotations.
  std::optional<Hit> assign_hit(const std::string& worker_id) const {
    std::shared_lock lock(mutex_);
    const auto target = static_cast<std::size_t>(config_.annotations_per_image_target);
    std::optional<std::size_t> best;
    std::pair<std::size_t, std::size_t> best_key{};
    for (std::size_t i = 0; i < hits_.size(); ++i) {
      const auto& h = hits_[i];
      if (submitted_.count({h.hit_id, worker_id}) != 0) continue;
      std::size_t min_count = SIZE_MAX;
      std::size_t total = 0;
      bool needs_work = false;
      for (const auto& img : h.image_ids) {
        const auto n = distinct_workers(img);
        min_count = std::min(min_count, n);
        total += n;
        if (n < target) needs_work = true;
      }
      if (!needs_work) continue;
      const std::pair<std::size_t, std::size_t> key{min_count, total};
      if (!best || key < best_key) {
        best = i;
        best_key = key;
      }
    }
    if (!best) return std::nullopt;
    return hits_[*best];
  }

  /// Validates and durably appends one HIT submission (one record per HIT image).
  /// Missing annotation ids, hit ids, worker ids and timestamps are filled in.
  SubmitOutcome record_submission(const std::string& hit_id, const std::string& worker_id,
                                  std::vector<AnnotationRecord> records,
                                  const SubmissionMeta& meta = {}) {
    if (worker_id.empty()) throw ValidationError("worker id must not be empty");
    const auto hit = find_hit(hit_id);
    if (!hit) throw NotFoundError("unknown HIT " + hit_id);

    std::unique_lock lock(mutex_);
    if (const auto it = submitted_.find({hit_id, worker_id}); it != submitted_.end()) {
      if (!meta.idempotency_key.empty() && it->second == meta.idempotency_key) {
        return SubmitOutcome::Replayed;
      }
      throw ConflictError("worker " + worker_id + " already submitted " + hit_id);
    }

    if (records.size() != hit->image_ids.size()) {
      throw ValidationError("incomplete submission: HIT " + hit_id + " has " +
                            std::to_string(hit->image_ids.size()) + " images, got " +
                            std::to_string(records.size()) + " records");
    }
    const std::set<std::string> expected(hit->image_ids.begin(), hit->image_ids.end());
    std::set<std::string> covered;
    const auto stamp = now_rfc3339();
    for (auto& r : records) {
      if (expected.count(r.image_id) == 0) {
        throw ValidationError("image " + r.image_id + " is not part of " + hit_id);
      }
      if (!covered.insert(r.image_id).second) {
        throw ValidationError("image " + r.image_id + " appears twice in submission");
      }
      if (!r.hit_id.empty() && r.hit_id != hit_id) {
        throw ValidationError("record hit_id does not match " + hit_id);
      }
      if (!r.worker_id.empty() && r.worker_id != worker_id) {
        throw ValidationError("record worker_id does not match " + worker_id);
      }
      r.hit_id = hit_id;
      r.worker_id = worker_id;
      if (r.submitted_at.empty()) r.submitted_at = stamp;
      if (!is_rfc3339_utc(r.submitted_at)) {
        throw ValidationError("submitted_at is not an RFC 3339 UTC timestamp");
      }
      if (r.annotation_id.empty()) r.annotation_id = hit_id + ":" + worker_id + ":" + r.image_id;
      if (annotation_ids_.count(r.annotation_id) != 0) {
        throw ConflictError("duplicate annotation id " + r.annotation_id);
      }
      for (const auto& e : r.ellipses) validate(e);
    }

    std::string batch;
    for (const auto& r : records) {
      batch += to_log_line(r);
      batch += '\n';
    }
    appender_->append(batch);

    json m{{"hit_id", hit_id},
           {"worker_id", worker_id},
           {"idempotency_key", meta.idempotency_key},
           {"instructions_version", meta.instructions_version},
           {"client_info", meta.client_info},
           {"submitted_at", stamp}};
    submitted_[{hit_id, worker_id}] = meta.idempotency_key;
    for (auto& r : records) index_record(std::move(r));
    // Metadata is advisory; the annotation log above is already durable.
    try {
      meta_appender_->append(m.dump() + "\n");
    } catch (const Error&) {
    }
    return SubmitOutcome::Recorded;
  }

  /// All records for an image in submission order.
  std::vector<AnnotationRecord> list_annotations(const std::string& image_id) const {
    std::shared_lock lock(mutex_);
    const auto it = by_image_.find(image_id);
    if (it == by_image_.end()) throw NotFoundError("unknown image " + image_id);
    std::vector<AnnotationRecord> out;
    out.reserve(it->second.size());
    for (const auto idx : it->second) out.push_back(records_[idx]);
    return out;
  }

  std::vector<AnnotationRecord> all_annotations() const {
    std::shared_lock lock(mutex_);
    return records_;
  }

  StoreCounts counts() const {
    std::shared_lock lock(mutex_);
    StoreCounts c;
    c.images_total = by_image_.size();
    c.annotations_total = records_.size();
    for (const auto& [img, idx] : by_image_) c.per_image[img] = idx.size();
    return c;
  }

  std::size_t recovered_dropped() const { return dropped_on_recovery_; }

 private:
  std::size_t distinct_workers(const std::string& image_id) const {
    const auto it = workers_by_image_.find(image_id);
    return it == workers_by_image_.end() ? 0 : it->second.size();
  }

  void index_record(AnnotationRecord r) {
    annotation_ids_.insert(r.annotation_id);
    workers_by_image_[r.image_id].insert(r.worker_id);
    by_image_[r.image_id].push_back(records_.size());
    records_.push_back(std::move(r));
  }

  // Rebuilds in-memory state from disk. Only the last (hit, worker) group can be
  // incomplete (a torn final write); it was never acknowledged and is dropped.
  void recover() {
    if (!std::filesystem::exists(log_path_)) return;
    std::ifstream in(log_path_, std::ios::binary);
    const std::string content((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
    const auto last_nl = content.rfind('\n');
    const std::size_t complete_len = last_nl == std::string::npos ? 0 : last_nl + 1;

    std::vector<AnnotationRecord> parsed;
    std::size_t start = 0;
    std::size_t lineno = 0;
    while (start < complete_len) {
      ++lineno;
      const auto nl = content.find('\n', start);
      const std::string_view line(content.data() + start, nl - start);
      start = nl + 1;
      if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
      try {
        parsed.push_back(annotation_from_json(json::parse(line)));
      } catch (const std::exception& e) {
        throw FormatError(log_path_.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }

    // Group consecutive records by (hit, worker); each submission is contiguous.
    std::vector<std::pair<std::size_t, std::size_t>> groups;
    for (std::size_t i = 0; i < parsed.size();) {
      std::size_t j = i + 1;
      while (j < parsed.size() && parsed[j].hit_id == parsed[i].hit_id &&
             parsed[j].worker_id == parsed[i].worker_id) {
        ++j;
      }
      groups.emplace_back(i, j);
      i = j;
    }

    std::size_t keep_until = parsed.size();
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto [b, e] = groups[g];
      const auto& first = parsed[b];
      const auto hit = find_hit(first.hit_id);
      if (!hit) throw FormatError("annotation log references unknown HIT " + first.hit_id);
      std::set<std::string> imgs;
      for (auto k = b; k < e; ++k) imgs.insert(parsed[k].image_id);
      const std::set<std::string> expected(hit->image_ids.begin(), hit->image_ids.end());
      if (imgs != expected || e - b != expected.size()) {
        if (g + 1 == groups.size()) {
          keep_until = b;
          break;
        }
        throw FormatError("annotation log holds an incomplete submission for " + first.hit_id +
                          " by " + first.worker_id);
      }
      if (submitted_.count({first.hit_id, first.worker_id}) != 0) {
        throw FormatError("annotation log holds a duplicate submission for " + first.hit_id);
      }
      submitted_[{first.hit_id, first.worker_id}] = "";
    }

    dropped_on_recovery_ = parsed.size() - keep_until;
    for (std::size_t i = 0; i < keep_until; ++i) index_record(std::move(parsed[i]));

    if (keep_until != parsed.size() || complete_len != content.size()) {
      std::string rewritten;
      for (const auto& r : records_) {
        rewritten += to_log_line(r);
        rewritten += '\n';
      }
      detail::atomic_rewrite(log_path_, rewritten);
    }
    load_meta();
  }

  void load_meta() {
    const auto path = meta_path();
    if (!std::filesystem::exists(path)) return;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
      try {
        const auto m = json::parse(line);
        const auto key = std::make_pair(m.at("hit_id").get<std::string>(),
                                        m.at("worker_id").get<std::string>());
        if (const auto it = submitted_.find(key); it != submitted_.end()) {
          it->second = m.value("idempotency_key", "");
        }
      } catch (const json::exception&) {
        // torn metadata line; the annotation log is authoritative
      }
    }
  }

  std::vector<Hit> hits_;
  HitConfig config_;
  std::filesystem::path log_path_;
  std::unordered_map<std::string, std::size_t> hit_index_;
  std::map<std::string, std::vector<std::string>> image_hits_;

  mutable std::shared_mutex mutex_;
  std::vector<AnnotationRecord> records_;
  std::map<std::string, std::vector<std::size_t>> by_image_;
  std::map<std::string, std::set<std::string>> workers_by_image_;
  std::set<std::string> annotation_ids_;
  std::map<std::pair<std::string, std::string>, std::string> submitted_;  // -> idempotency key
  std::size_t dropped_on_recovery_{0};

  std::optional<detail::DurableAppender> appender_;
  std::optional<detail::DurableAppender> meta_appender_;
};

}  // namespace airway_crowd
