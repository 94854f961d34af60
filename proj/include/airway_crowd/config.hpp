#pragma once

// Pipeline configuration: a flat `key = value` file with optional [sections]
// (keys become `section.key`), plus command-line overrides.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "airway_crowd/crowd_sim.hpp"
#include "airway_crowd/errors.hpp"
#include "airway_crowd/measurement.hpp"
#include "airway_crowd/qc.hpp"
#include "airway_crowd/reslice.hpp"
#include "airway_crowd/task_store.hpp"
#include "airway_crowd/text.hpp"

namespace airway_crowd {

using ConfigMap = std::map<std::string, std::string>;

inline ConfigMap parse_config(std::string_view content, std::string_view origin = "config") {
  ConfigMap out;
  std::string section;
  std::size_t lineno = 0;
  for (auto raw : text::split(content, '\n')) {
    ++lineno;
    // strip comments outside quotes
    bool quoted = false;
    std::size_t cut = raw.size();
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == '"') quoted = !quoted;
      if (raw[i] == '#' && !quoted) {
        cut = i;
        break;
      }
    }
    const auto line = text::trim(raw.substr(0, cut));
    if (line.empty()) continue;
    const auto where = std::string(origin) + ":" + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw FormatError(where + "unterminated section header");
      section = std::string(text::trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw FormatError(where + "expected key = value");
    auto key = std::string(text::trim(line.substr(0, eq)));
    auto value = text::trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (key.empty()) throw FormatError(where + "empty key");
    out[section.empty() ? key : section + "." + key] = std::string(value);
  }
  return out;
}

inline ConfigMap load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open config " + path.string());
  const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(content, path.string());
}

struct PipelineConfig {
  std::filesystem::path volume;
  std::filesystem::path sites;
  std::filesystem::path out{"airway_crowd_data"};
  std::filesystem::path log;    // empty: <out>/annotations.jsonl
  std::filesystem::path truth;  // optional simulate ground truth (JSON)
  std::uint64_t seed{20160601};
  int annotations_per_image{10};  // simulate: workers per image
  bool include_multi_pair{false};

  SliceConfig slice;
  HitConfig hits;
  QcConfig qc;
  AggregateConfig aggregate;

  double sim_sigma{0.15};
  double sim_p_adjust{0.55};
  double sim_p_empty{0.5};
  double sim_vessel_offset{12.0};
  std::string sim_mixture{"conscientious:0.7,single_ellipse:0.1,spammer:0.08,vessel:0.07,no_airway:0.05"};

  std::filesystem::path log_path() const { return log.empty() ? out / "annotations.jsonl" : log; }

  void validate() const {
    slice.validate();
    hits.validate();
    qc.validate();
    aggregate.validate();
    if (annotations_per_image < 0) throw ValidationError("annotations_per_image must be >= 0");
  }

  /// Applies recognised keys; unknown keys are an error so typos surface.
  void apply(const ConfigMap& kv) {
    for (const auto& [key, value] : kv) {
      const auto num = [&] { return text::parse_double(value, key); };
      const auto integer = [&] { return static_cast<int>(text::parse_int(value, key)); };
      if (key == "volume") volume = value;
      else if (key == "sites") sites = value;
      else if (key == "out") out = value;
      else if (key == "log") log = value;
      else if (key == "truth") truth = value;
      else if (key == "seed") seed = static_cast<std::uint64_t>(text::parse_int(value, key));
      else if (key == "include_multi_pair") include_multi_pair = value == "true" || value == "1";
      else if (key == "slice.side") slice.side = integer();
      else if (key == "slice.window_lo") slice.window_lo = num();
      else if (key == "slice.window_hi") slice.window_hi = num();
      else if (key == "slice.sample_step") slice.sample_step = num();
      else if (key == "hits.images_per_hit") hits.images_per_hit = integer();
      else if (key == "hits.annotations_per_image_target") hits.annotations_per_image_target = integer();
      else if (key == "hits.reward_label") hits.reward_label = value;
      else if (key == "hits.shuffle_seed") hits.shuffle_seed = static_cast<std::uint64_t>(text::parse_int(value, key));
      else if (key == "qc.pair_distance_max") qc.pair_distance_max = num();
      else if (key == "qc.corner_margin") qc.corner_margin = num();
      else if (key == "qc.corner_radius_max") qc.corner_radius_max = num();
      else if (key == "aggregate.min_annotations") aggregate.min_annotations = integer();
      else if (key == "simulate.annotations_per_image") annotations_per_image = integer();
      else if (key == "simulate.sigma") sim_sigma = num();
      else if (key == "simulate.p_adjust") sim_p_adjust = num();
      else if (key == "simulate.p_empty") sim_p_empty = num();
      else if (key == "simulate.vessel_offset") sim_vessel_offset = num();
      else if (key == "simulate.mixture") sim_mixture = value;
      else throw ValidationError("unknown config key '" + key + "'");
    }
    qc.image_side = slice.side;
  }

  /// Parses `kind:weight,...` into a worker mixture using the simulate.* parameters.
  std::vector<MixtureComponent> mixture() const {
    std::vector<MixtureComponent> out;
    for (const auto item : text::split(sim_mixture, ',')) {
      const auto parts = text::split(text::trim(item), ':');
      if (parts.size() != 2) throw ValidationError("mixture entries must be kind:weight");
      const auto kind = text::trim(parts[0]);
      const double w = text::parse_double(parts[1], "mixture weight");
      WorkerProfile p;
      if (kind == "conscientious") p = WorkerProfile::conscientious(sim_sigma);
      else if (kind == "single_ellipse") p = WorkerProfile::single_ellipse(sim_p_adjust);
      else if (kind == "spammer") p = WorkerProfile::spammer(sim_p_empty);
      else if (kind == "vessel") p = WorkerProfile::vessel(sim_vessel_offset);
      else if (kind == "no_airway") p = WorkerProfile::no_airway();
      else throw ValidationError("unknown worker kind '" + std::string(kind) + "'");
      out.push_back({p, w});
    }
    validate_mixture(out);
    return out;
  }
};

}  // namespace airway_crowd
