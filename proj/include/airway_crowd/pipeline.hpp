#pragma once

// Pipeline stages over a data directory. Each stage reads and writes only the
// files named here:
//
//   images/<image_id>.png, manifest.csv      reslice
//   hits.json                                make-hits
//   annotations.jsonl                        serve / simulate
//   qc.csv, qc_tally.json                    qc
//   measurements.csv                         measure
//   aggregates.csv                           aggregate
//   report/report.csv, report/scatter_*.csv  evaluate

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "airway_crowd/config.hpp"
#include "airway_crowd/crowd_sim.hpp"
#include "airway_crowd/evaluation.hpp"
#include "airway_crowd/measurement.hpp"
#include "airway_crowd/png.hpp"
#include "airway_crowd/qc.hpp"
#include "airway_crowd/reslice.hpp"
#include "airway_crowd/task_store.hpp"
#include "airway_crowd/volume.hpp"

namespace airway_crowd::pipeline {

namespace fs = std::filesystem;

inline fs::path manifest_path(const fs::path& out) { return out / "manifest.csv"; }
inline fs::path hits_path(const fs::path& out) { return out / "hits.json"; }
inline fs::path images_dir(const fs::path& out) { return out / "images"; }
inline fs::path qc_csv_path(const fs::path& out) { return out / "qc.csv"; }
inline fs::path qc_tally_path(const fs::path& out) { return out / "qc_tally.json"; }
inline fs::path measurements_path(const fs::path& out) { return out / "measurements.csv"; }
inline fs::path aggregates_path(const fs::path& out) { return out / "aggregates.csv"; }
inline fs::path report_dir(const fs::path& out) { return out / "report"; }

/// Renders four views per site into images/ and writes the manifest.
inline std::vector<ManifestEntry> reslice(const CtVolume& volume,
                                          const std::vector<AirwaySite>& sites,
                                          const SliceConfig& config, const fs::path& out) {
  config.validate();
  fs::create_directories(images_dir(out));
  std::vector<ManifestEntry> manifest;
  for (const auto& site : sites) {
    for (const auto& img : generate_site_images(volume, site, config)) {
      write_file(images_dir(out) / (img.image_id + ".png"), encode_png(img));
      manifest.push_back(manifest_entry(img));
    }
  }
  write_manifest(manifest, manifest_path(out));
  return manifest;
}

inline std::vector<ManifestEntry> reslice(const PipelineConfig& cfg) {
  const auto volume = load_volume(cfg.volume);
  const auto sites = load_sites(cfg.sites, volume);
  return reslice(volume, sites, cfg.slice, cfg.out);
}

inline std::vector<Hit> make_hits(const PipelineConfig& cfg) {
  const auto manifest = load_manifest(manifest_path(cfg.out));
  std::vector<std::string> ids;
  for (const auto& e : manifest) ids.push_back(e.image_id);
  auto hits = airway_crowd::make_hits(ids, cfg.hits);
  write_hit_manifest(hits, hits_path(cfg.out));
  return hits;
}

/// Truth per image: from the truth file when given, else concentric circles with
/// the site's expert areas converted to pixels.
inline std::vector<ImageTruth> load_truths(const PipelineConfig& cfg,
                                           const std::vector<ManifestEntry>& manifest) {
  std::vector<ImageTruth> truths;
  if (!cfg.truth.empty()) {
    std::ifstream in(cfg.truth);
    if (!in) throw NotFoundError("cannot open truth file " + cfg.truth.string());
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw FormatError(cfg.truth.string() + ": " + e.what());
    }
    std::map<std::string, ImageTruth> by_id;
    for (const auto& t : j) {
      auto truth = truth_from_json(t);
      by_id.emplace(truth.image_id, std::move(truth));
    }
    for (const auto& e : manifest) {
      const auto it = by_id.find(e.image_id);
      if (it == by_id.end()) throw NotFoundError("no truth for image " + e.image_id);
      truths.push_back(it->second);
    }
    return truths;
  }
  const auto sites = load_sites(cfg.sites);
  std::map<std::string, const AirwaySite*> by_site;
  for (const auto& s : sites) by_site[s.site_id] = &s;
  for (const auto& e : manifest) {
    const auto it = by_site.find(e.site_id);
    if (it == by_site.end()) throw NotFoundError("site " + e.site_id + " not in sites file");
    truths.push_back(concentric_truth(
        e.image_id, area_mm2_to_px2(it->second->expert_lumen_area, e.sample_step_mm),
        area_mm2_to_px2(it->second->expert_wall_area, e.sample_step_mm), cfg.slice.side));
  }
  return truths;
}

/// Simulated campaign written as an annotation log. HIT ids come from hits.json
/// when it exists.
inline std::vector<AnnotationRecord> simulate(const PipelineConfig& cfg,
                                              const std::vector<ImageTruth>& truths) {
  auto records = simulate_campaign(truths, cfg.mixture(), cfg.annotations_per_image, cfg.seed);
  if (fs::exists(hits_path(cfg.out))) {
    std::map<std::string, std::string> hit_of;
    for (const auto& h : load_hit_manifest(hits_path(cfg.out))) {
      for (const auto& img : h.image_ids) hit_of.emplace(img, h.hit_id);
    }
    for (auto& r : records) {
      if (const auto it = hit_of.find(r.image_id); it != hit_of.end()) r.hit_id = it->second;
    }
  }
  fs::create_directories(cfg.log_path().parent_path().empty() ? fs::path(".")
                                                              : cfg.log_path().parent_path());
  write_annotation_log(records, cfg.log_path());
  return records;
}

inline std::vector<AnnotationRecord> simulate(const PipelineConfig& cfg) {
  return simulate(cfg, load_truths(cfg, load_manifest(manifest_path(cfg.out))));
}

inline FilterResult qc(const PipelineConfig& cfg) {
  auto result = filter_usable(read_annotation_log(cfg.log_path()), cfg.qc);
  write_qc_report(result, cfg.qc, qc_csv_path(cfg.out), qc_tally_path(cfg.out));
  return result;
}

inline std::vector<AirwayMeasurement> measure(const PipelineConfig& cfg) {
  const auto result = filter_usable(read_annotation_log(cfg.log_path()), cfg.qc);
  auto ms = measure_all(result.usable, MeasureOptions{cfg.include_multi_pair});
  write_measurements_csv(ms, measurements_path(cfg.out));
  return ms;
}

inline std::vector<AggregatedMeasurement> aggregate(const PipelineConfig& cfg) {
  auto aggs = aggregate_all(load_measurements_csv(measurements_path(cfg.out)), cfg.aggregate);
  write_aggregates_csv(aggs, aggregates_path(cfg.out));
  return aggs;
}

inline std::vector<CorrelationReport> evaluate(const PipelineConfig& cfg) {
  auto reports = build_report(load_measurements_csv(measurements_path(cfg.out)),
                              load_aggregates_csv(aggregates_path(cfg.out)),
                              load_sites(cfg.sites), load_manifest(manifest_path(cfg.out)));
  write_report(reports, report_dir(cfg.out));
  return reports;
}

/// One-line summary of a QC tally, e.g. "total=900 usable=290 NoEllipse=133 ...".
inline std::string tally_line(const QcTally& tally) {
  std::string s = "total=" + std::to_string(tally.total) + " usable=" +
                  std::to_string(tally.usable());
  for (const auto k : kAllQcKinds) {
    s += " " + std::string(to_string(k)) + "=" + std::to_string(tally.count(k));
  }
  return s;
}

inline std::string report_row(const CorrelationReport& r) {
  return std::string(to_string(r.group.orientation)) + "," +
         std::string(to_string(r.group.quantity)) + "," + std::string(to_string(r.group.level)) +
         "," + std::to_string(r.n) + "," + format_r(r.r);
}

}  // namespace airway_crowd::pipeline
