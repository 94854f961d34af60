#pragma once

// Lumen/wall areas per annotation and per-image median aggregation.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "airway_crowd/annotation.hpp"
#include "airway_crowd/errors.hpp"
#include "airway_crowd/qc.hpp"
#include "airway_crowd/text.hpp"

namespace airway_crowd {

struct AirwayMeasurement {
  std::string annotation_id;
  std::string image_id;
  std::string worker_id;
  double lumen_area{0.0};  // px^2
  double wall_area{0.0};   // px^2
};

struct MeasureOptions {
  /// Measure MultiPair annotations via their largest-lumen pair instead of rejecting them.
  bool include_multi_pair{false};
};

/// Areas of the inner (lumen) and outer (wall) ellipse of a usable annotation.
inline AirwayMeasurement measure(const PairedAnnotation& pa, const MeasureOptions& options = {}) {
  const EllipsePair* pair = nullptr;
  if (pa.category.kind == QcKind::SinglePair && pa.pairs.size() == 1) {
    pair = &pa.pairs.front();
  } else if (pa.category.kind == QcKind::MultiPair && !pa.pairs.empty()) {
    if (!options.include_multi_pair) {
      throw ValidationError("annotation " + pa.annotation_id +
                            " has multiple pairs; only single-pair annotations are measured");
    }
    pair = &*std::max_element(pa.pairs.begin(), pa.pairs.end(),
                              [](const EllipsePair& a, const EllipsePair& b) {
                                return ellipse_area(a.inner) < ellipse_area(b.inner);
                              });
  } else {
    throw ValidationError("annotation " + pa.annotation_id + " is not a measurable pair");
  }
  const double lumen = ellipse_area(pair->inner);
  const double wall = ellipse_area(pair->outer);
  if (!(lumen > 0.0 && lumen < wall)) {
    throw ValidationError("annotation " + pa.annotation_id + " has a degenerate pair");
  }
  return {pa.annotation_id, pa.image_id, pa.worker_id, lumen, wall};
}

/// Measures every annotation the options allow; others are skipped.
inline std::vector<AirwayMeasurement> measure_all(const std::vector<PairedAnnotation>& usable,
                                                  const MeasureOptions& options = {}) {
  std::vector<AirwayMeasurement> out;
  for (const auto& pa : usable) {
    if (pa.category.kind == QcKind::MultiPair && !options.include_multi_pair) continue;
    out.push_back(measure(pa, options));
  }
  return out;
}

struct AggregateConfig {
  int min_annotations{3};

  void validate() const {
    if (min_annotations < 1) throw ValidationError("min_annotations must be >= 1");
  }
};

struct AggregatedMeasurement {
  std::string image_id;
  std::size_t n_used{0};
  double lumen_area_median{0.0};
  double wall_area_median{0.0};
};

/// Median; even counts average the two middle order statistics.
inline double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of an empty sample");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

inline std::optional<AggregatedMeasurement> aggregate_image(
    const std::vector<AirwayMeasurement>& measurements, const AggregateConfig& config) {
  config.validate();
  if (measurements.empty()) return std::nullopt;
  const auto& image_id = measurements.front().image_id;
  std::vector<double> lumen;
  std::vector<double> wall;
  for (const auto& m : measurements) {
    if (m.image_id != image_id) {
      throw ValidationError("aggregate_image: mixed image ids " + image_id + " and " + m.image_id);
    }
    lumen.push_back(m.lumen_area);
    wall.push_back(m.wall_area);
  }
  if (measurements.size() < static_cast<std::size_t>(config.min_annotations)) return std::nullopt;
  return AggregatedMeasurement{image_id, measurements.size(), median(std::move(lumen)),
                               median(std::move(wall))};
}

/// Groups by image (sorted by image id) and keeps images meeting the threshold.
inline std::vector<AggregatedMeasurement> aggregate_all(
    const std::vector<AirwayMeasurement>& measurements, const AggregateConfig& config) {
  std::map<std::string, std::vector<AirwayMeasurement>> by_image;
  for (const auto& m : measurements) by_image[m.image_id].push_back(m);
  std::vector<AggregatedMeasurement> out;
  for (const auto& [id, ms] : by_image) {
    if (auto agg = aggregate_image(ms, config)) out.push_back(std::move(*agg));
  }
  return out;
}

/// px^2 -> mm^2 for a pixel edge of `sample_step_mm`.
inline double area_px2_to_mm2(double area_px2, double sample_step_mm) {
  return area_px2 * sample_step_mm * sample_step_mm;
}

inline double area_mm2_to_px2(double area_mm2, double sample_step_mm) {
  return area_mm2 / (sample_step_mm * sample_step_mm);
}

// ---------------------------------------------------------------------------
// CSV

inline void write_measurements_csv(const std::vector<AirwayMeasurement>& ms,
                                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "annotation_id,image_id,worker_id,lumen_area_px2,wall_area_px2\n";
  for (const auto& m : ms) {
    out << m.annotation_id << ',' << m.image_id << ',' << m.worker_id << ','
        << text::format_double(m.lumen_area) << ',' << text::format_double(m.wall_area) << '\n';
  }
}

inline std::vector<AirwayMeasurement> load_measurements_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) ||
      text::trim(line) != "annotation_id,image_id,worker_id,lumen_area_px2,wall_area_px2") {
    throw FormatError(path.string() + ": unexpected measurements header");
  }
  std::vector<AirwayMeasurement> out;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto f = text::split(text::trim(line), ',');
    if (f.size() != 5) throw FormatError(path.string() + ": measurement rows need 5 fields");
    out.push_back({std::string(f[0]), std::string(f[1]), std::string(f[2]),
                   text::parse_double(f[3], "lumen_area_px2"),
                   text::parse_double(f[4], "wall_area_px2")});
  }
  return out;
}

inline void write_aggregates_csv(const std::vector<AggregatedMeasurement>& aggs,
                                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "image_id,n_used,lumen_median_px2,wall_median_px2\n";
  for (const auto& a : aggs) {
    out << a.image_id << ',' << a.n_used << ',' << text::format_double(a.lumen_area_median)
        << ',' << text::format_double(a.wall_area_median) << '\n';
  }
}

inline std::vector<AggregatedMeasurement> load_aggregates_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) ||
      text::trim(line) != "image_id,n_used,lumen_median_px2,wall_median_px2") {
    throw FormatError(path.string() + ": unexpected aggregates header");
  }
  std::vector<AggregatedMeasurement> out;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto f = text::split(text::trim(line), ',');
    if (f.size() != 4) throw FormatError(path.string() + ": aggregate rows need 4 fields");
    out.push_back({std::string(f[0]), static_cast<std::size_t>(text::parse_int(f[1], "n_used")),
                   text::parse_double(f[2], "lumen_median_px2"),
                   text::parse_double(f[3], "wall_median_px2")});
  }
  return out;
}

}  // namespace airway_crowd
