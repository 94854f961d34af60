#pragma once

// Synthetic crowd workers. Each profile reproduces one observed behaviour (careful
// annotator, single contour, spam, vessel instead of airway, "no airway" report)
// so the pipeline can be exercised without people.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "airway_crowd/annotation.hpp"
#include "airway_crowd/errors.hpp"
#include "airway_crowd/text.hpp"

namespace airway_crowd {

enum class ProfileKind { Conscientious, SingleEllipse, Spammer, VesselAnnotator, NoAirwayReporter };

constexpr std::string_view to_string(ProfileKind k) {
  switch (k) {
    case ProfileKind::Conscientious: return "conscientious";
    case ProfileKind::SingleEllipse: return "single_ellipse";
    case ProfileKind::Spammer: return "spammer";
    case ProfileKind::VesselAnnotator: return "vessel";
    case ProfileKind::NoAirwayReporter: return "no_airway";
  }
  return "conscientious";
}

struct WorkerProfile {
  ProfileKind kind{ProfileKind::Conscientious};
  double sigma{0.15};    // Conscientious: relative radius noise / centre jitter
  double p_adjust{0.5};  // SingleEllipse: probability the ellipse was adjusted
  double p_empty{0.5};   // Spammer: probability of submitting nothing
  double offset{12.0};   // VesselAnnotator: translation in pixels
  std::uint64_t seed{0};

  static WorkerProfile conscientious(double sigma) { return {ProfileKind::Conscientious, sigma}; }
  static WorkerProfile single_ellipse(double p_adjust) {
    WorkerProfile p{ProfileKind::SingleEllipse};
    p.p_adjust = p_adjust;
    return p;
  }
  static WorkerProfile spammer(double p_empty = 0.5) {
    WorkerProfile p{ProfileKind::Spammer};
    p.p_empty = p_empty;
    return p;
  }
  static WorkerProfile vessel(double offset) {
    WorkerProfile p{ProfileKind::VesselAnnotator};
    p.offset = offset;
    return p;
  }
  static WorkerProfile no_airway() { return {ProfileKind::NoAirwayReporter}; }

  void validate() const {
    if (!(sigma >= 0.0)) throw ValidationError("profile sigma must be >= 0");
    if (!(p_adjust >= 0.0 && p_adjust <= 1.0)) throw ValidationError("p_adjust must be in [0,1]");
    if (!(p_empty >= 0.0 && p_empty <= 1.0)) throw ValidationError("p_empty must be in [0,1]");
  }
};

/// Ground truth for one image, in image-pixel coordinates.
struct ImageTruth {
  std::string image_id;
  bool airway_visible{true};
  Ellipse true_lumen;
  Ellipse true_wall;
  int image_side{50};

  void validate() const {
    airway_crowd::validate(true_lumen);
    airway_crowd::validate(true_wall);
    if (airway_visible && !(ellipse_area(true_lumen) < ellipse_area(true_wall))) {
      throw ValidationError("truth for " + image_id + ": lumen must be smaller than wall");
    }
  }
};

inline json to_json(const ImageTruth& t) {
  return json{{"image_id", t.image_id},
              {"airway_visible", t.airway_visible},
              {"lumen", to_json(t.true_lumen)},
              {"wall", to_json(t.true_wall)},
              {"image_side", t.image_side}};
}

inline ImageTruth truth_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("truth must be a JSON object");
  ImageTruth t;
  t.image_id = detail::string_field(j, "image_id");
  t.airway_visible = j.at("airway_visible").get<bool>();
  t.true_lumen = ellipse_from_json(j.at("lumen"));
  t.true_wall = ellipse_from_json(j.at("wall"));
  t.image_side = j.value("image_side", 50);
  t.validate();
  return t;
}

/// Concentric circles of the given areas (px^2) centred in a side x side image.
inline ImageTruth concentric_truth(std::string image_id, double lumen_area_px2,
                                   double wall_area_px2, int side = 50) {
  const double c = (side - 1) / 2.0;
  const double rl = std::sqrt(lumen_area_px2 / std::numbers::pi);
  const double rw = std::sqrt(wall_area_px2 / std::numbers::pi);
  ImageTruth t{std::move(image_id), true,
               Ellipse{c, c, rl, rl, 0.0, true, KindHint::Lumen},
               Ellipse{c, c, rw, rw, 0.0, true, KindHint::Wall}, side};
  t.validate();
  return t;
}

/// Small corner circle meaning "no airway visible".
inline Ellipse no_airway_marker() { return Ellipse{2.0, 2.0, 2.0, 2.0, 0.0, true, KindHint::Unspecified}; }

/// Default ellipse the annotation tool spawns on a click.
inline Ellipse default_spawn(double cx, double cy) {
  return Ellipse{cx, cy, 5.0, 5.0, 0.0, false, KindHint::Unspecified};
}

inline constexpr std::string_view kSimEpoch = "2016-06-01T12:00:00.000Z";

namespace detail {

inline std::mt19937_64 worker_rng(std::uint64_t seed, std::string_view image_id) {
  const auto h = text::fnv1a(image_id, text::fnv1a(std::to_string(seed)));
  std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

inline Ellipse noisy(const Ellipse& truth, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  Ellipse e = truth;
  const double mean_r = 0.5 * (truth.rx + truth.ry);
  e.rx = truth.rx * std::exp(sigma * unit(rng));
  e.ry = truth.ry * std::exp(sigma * unit(rng));
  e.cx = truth.cx + sigma * mean_r * unit(rng);
  e.cy = truth.cy + sigma * mean_r * unit(rng);
  e.theta = wrap_theta(truth.theta + sigma * unit(rng));
  e.adjusted = true;
  return e;
}

/// Click position away from the corners.
inline std::pair<double, double> random_click(int side, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(0.2 * side, 0.8 * side);
  return {pos(rng), pos(rng)};
}

}  // namespace detail

/// One worker's annotation of one image. Deterministic in (profile.seed, image_id).
inline AnnotationRecord simulate_worker(const WorkerProfile& profile, const ImageTruth& truth,
                                        const std::string& worker_id = "sim-worker") {
  profile.validate();
  truth.validate();
  auto rng = detail::worker_rng(profile.seed, truth.image_id);
  std::uniform_real_distribution<double> unit01(0.0, 1.0);

  AnnotationRecord rec;
  rec.annotation_id = worker_id + ":" + truth.image_id;
  rec.image_id = truth.image_id;
  rec.worker_id = worker_id;
  rec.hit_id = "sim";
  rec.submitted_at = std::string(kSimEpoch);

  switch (profile.kind) {
    case ProfileKind::Conscientious:
      if (!truth.airway_visible) {
        rec.ellipses.push_back(no_airway_marker());
        break;
      }
      rec.ellipses.push_back(detail::noisy(truth.true_lumen, profile.sigma, rng));
      rec.ellipses.push_back(detail::noisy(truth.true_wall, profile.sigma, rng));
      rec.ellipses[0].kind_hint = KindHint::Lumen;
      rec.ellipses[1].kind_hint = KindHint::Wall;
      break;
    case ProfileKind::SingleEllipse: {
      if (unit01(rng) < profile.p_adjust) {
        auto e = detail::noisy(truth.true_lumen, 0.15, rng);
        e.kind_hint = KindHint::Lumen;
        rec.ellipses.push_back(e);
      } else {
        const auto [x, y] = detail::random_click(truth.image_side, rng);
        rec.ellipses.push_back(default_spawn(x, y));
      }
      break;
    }
    case ProfileKind::Spammer:
      if (unit01(rng) >= profile.p_empty) {
        const auto [x, y] = detail::random_click(truth.image_side, rng);
        rec.ellipses.push_back(default_spawn(x, y));
      }
      break;
    case ProfileKind::VesselAnnotator: {
      // A neighbouring vessel: a plausible pair of a different size, off-centre.
      const double angle = 2.0 * std::numbers::pi * unit01(rng);
      const double scale = 0.5 + unit01(rng);
      const double dx = profile.offset * std::cos(angle);
      const double dy = profile.offset * std::sin(angle);
      for (const auto* src : {&truth.true_lumen, &truth.true_wall}) {
        Ellipse e = *src;
        e.cx += dx;
        e.cy += dy;
        e.rx *= scale;
        e.ry *= scale;
        e.adjusted = true;
        rec.ellipses.push_back(e);
      }
      break;
    }
    case ProfileKind::NoAirwayReporter:
      rec.ellipses.push_back(no_airway_marker());
      break;
  }
  return rec;
}

struct MixtureComponent {
  WorkerProfile profile;
  double weight{0.0};
};

inline void validate_mixture(const std::vector<MixtureComponent>& mixture) {
  if (mixture.empty()) throw ValidationError("worker mixture is empty");
  double total = 0.0;
  for (const auto& c : mixture) {
    if (!(c.weight >= 0.0)) throw ValidationError("mixture weights must be >= 0");
    c.profile.validate();
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("mixture weights must sum to 1");
}

/// n_per_image simulated annotations per image. Worker kinds are drawn from the
/// mixture; every annotation gets its own synthetic worker id.
inline std::vector<AnnotationRecord> simulate_campaign(const std::vector<ImageTruth>& truths,
                                                       const std::vector<MixtureComponent>& mixture,
                                                       int n_per_image, std::uint64_t seed) {
  validate_mixture(mixture);
  if (n_per_image < 0) throw ValidationError("n_per_image must be >= 0");
  std::vector<double> weights;
  for (const auto& c : mixture) weights.push_back(c.weight);

  std::vector<AnnotationRecord> out;
  std::size_t counter = 0;
  for (const auto& truth : truths) {
    auto pick_rng = detail::worker_rng(seed, "mixture:" + truth.image_id);
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    for (int k = 0; k < n_per_image; ++k) {
      WorkerProfile profile = mixture[pick(pick_rng)].profile;
      profile.seed = text::fnv1a(std::to_string(k), seed ^ 0x9e3779b97f4a7c15ULL);
      char wid[64];
      std::snprintf(wid, sizeof(wid), "simw-%06zu", counter);
      auto rec = simulate_worker(profile, truth, wid);
      rec.annotation_id = "sim-" + truth.image_id + "-" + std::to_string(k);
      out.push_back(std::move(rec));
      ++counter;
    }
  }
  return out;
}

}  // namespace airway_crowd
