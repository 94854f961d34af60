#pragma once

// Expert-vs-crowd correlation reports.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "airway_crowd/errors.hpp"
#include "airway_crowd/measurement.hpp"
#include "airway_crowd/reslice.hpp"
#include "airway_crowd/text.hpp"
#include "airway_crowd/volume.hpp"

namespace airway_crowd {

/// Sample Pearson correlation. Throws on length mismatch, n < 2 or a constant input.
inline double pearson_r(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ValidationError("pearson_r: length mismatch");
  if (xs.size() < 2) throw ValidationError("pearson_r: need at least two samples");
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw ValidationError("pearson_r: constant input");
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

/// Pearson r, or nullopt where it is undefined.
inline std::optional<double> try_pearson_r(std::span<const double> xs,
                                           std::span<const double> ys) {
  try {
    return pearson_r(xs, ys);
  } catch (const ValidationError&) {
    return std::nullopt;
  }
}

enum class OrientationGroup { Original, AxesParallel };
enum class Quantity { Lumen, Wall };
enum class Level { PerAnnotation, PerImageAggregate };

constexpr std::string_view to_string(OrientationGroup g) {
  return g == OrientationGroup::Original ? "original" : "axes_parallel";
}
constexpr std::string_view to_string(Quantity q) { return q == Quantity::Lumen ? "lumen" : "wall"; }
constexpr std::string_view to_string(Level l) {
  return l == Level::PerAnnotation ? "per_annotation" : "aggregate";
}

inline OrientationGroup orientation_group(ViewKind v) {
  return v == ViewKind::Original ? OrientationGroup::Original : OrientationGroup::AxesParallel;
}

struct EvalGroup {
  OrientationGroup orientation{OrientationGroup::Original};
  Quantity quantity{Quantity::Lumen};
  Level level{Level::PerAnnotation};

  bool operator==(const EvalGroup&) const = default;
  std::string name() const {
    return std::string(to_string(orientation)) + "_" + std::string(to_string(quantity)) + "_" +
           std::string(to_string(level));
  }
};

/// All 8 groups in report order.
inline std::array<EvalGroup, 8> all_eval_groups() {
  std::array<EvalGroup, 8> out{};
  std::size_t i = 0;
  for (const auto level : {Level::PerAnnotation, Level::PerImageAggregate}) {
    for (const auto orient : {OrientationGroup::Original, OrientationGroup::AxesParallel}) {
      for (const auto q : {Quantity::Lumen, Quantity::Wall}) out[i++] = {orient, q, level};
    }
  }
  return out;
}

struct ScatterPoint {
  double expert{0.0};
  double worker{0.0};
};

struct CorrelationReport {
  EvalGroup group;
  std::size_t n{0};
  std::optional<double> r;  // nullopt: undefined (n < 2 or constant marginal)
  std::vector<ScatterPoint> scatter;
};

/// Pairs crowd areas (converted to mm^2) with their site's expert areas, grouped by orientation,
/// quantity and level. Per-annotation rows use `measurements`, aggregate rows use
/// `aggregates`.
inline std::vector<CorrelationReport> build_report(
    const std::vector<AirwayMeasurement>& measurements,
    const std::vector<AggregatedMeasurement>& aggregates, const std::vector<AirwaySite>& sites,
    const std::vector<ManifestEntry>& manifest) {
  std::map<std::string, const ManifestEntry*> by_image;
  for (const auto& e : manifest) by_image[e.image_id] = &e;
  std::map<std::string, const AirwaySite*> by_site;
  for (const auto& s : sites) by_site[s.site_id] = &s;

  auto lookup = [&](const std::string& image_id) {
    const auto it = by_image.find(image_id);
    if (it == by_image.end()) throw NotFoundError("image " + image_id + " has no manifest entry");
    const auto sit = by_site.find(it->second->site_id);
    if (sit == by_site.end()) {
      throw NotFoundError("site " + it->second->site_id + " of image " + image_id + " not found");
    }
    return std::make_tuple(orientation_group(it->second->view), sit->second,
                           it->second->sample_step_mm);
  };

  auto groups = all_eval_groups();
  std::vector<CorrelationReport> reports;
  for (const auto& g : groups) reports.push_back({g, 0, std::nullopt, {}});
  auto slot = [&](OrientationGroup o, Quantity q, Level l) -> CorrelationReport& {
    for (auto& r : reports) {
      if (r.group == EvalGroup{o, q, l}) return r;
    }
    throw Error("unreachable: missing eval group");
  };

  for (const auto& m : measurements) {
    const auto [orient, site, step] = lookup(m.image_id);
    slot(orient, Quantity::Lumen, Level::PerAnnotation)
        .scatter.push_back({site->expert_lumen_area, area_px2_to_mm2(m.lumen_area, step)});
    slot(orient, Quantity::Wall, Level::PerAnnotation)
        .scatter.push_back({site->expert_wall_area, area_px2_to_mm2(m.wall_area, step)});
  }
  for (const auto& a : aggregates) {
    const auto [orient, site, step] = lookup(a.image_id);
    slot(orient, Quantity::Lumen, Level::PerImageAggregate)
        .scatter.push_back({site->expert_lumen_area, area_px2_to_mm2(a.lumen_area_median, step)});
    slot(orient, Quantity::Wall, Level::PerImageAggregate)
        .scatter.push_back({site->expert_wall_area, area_px2_to_mm2(a.wall_area_median, step)});
  }

  for (auto& r : reports) {
    r.n = r.scatter.size();
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& p : r.scatter) {
      xs.push_back(p.expert);
      ys.push_back(p.worker);
    }
    r.r = try_pearson_r(xs, ys);
  }
  return reports;
}

inline std::string format_r(const std::optional<double>& r) {
  return r ? text::format_double(*r) : std::string("NA");
}

/// Writes `report.csv` plus one `scatter_<group>.csv` per group into `dir`.
inline void write_report(const std::vector<CorrelationReport>& reports,
                         const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "report.csv", std::ios::trunc);
  if (!out) throw Error("cannot write " + (dir / "report.csv").string());
  out << "orientation_group,quantity,level,n,r\n";
  for (const auto& r : reports) {
    out << to_string(r.group.orientation) << ',' << to_string(r.group.quantity) << ','
        << to_string(r.group.level) << ',' << r.n << ',' << format_r(r.r) << '\n';
    std::ofstream sc(dir / ("scatter_" + r.group.name() + ".csv"), std::ios::trunc);
    sc << "expert_mm2,worker_mm2\n";
    for (const auto& p : r.scatter) {
      sc << text::format_double(p.expert) << ',' << text::format_double(p.worker) << '\n';
    }
  }
}

}  // namespace airway_crowd
