#pragma once

// Annotation quality control: the usable/unusable taxonomy and ellipse pairing.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "airway_crowd/annotation.hpp"
#include "airway_crowd/errors.hpp"

namespace airway_crowd {

struct QcConfig {
  double pair_distance_max{10.0};  // pixels
  double corner_margin{5.0};       // pixels, Chebyshev distance to a corner
  double corner_radius_max{3.0};   // pixels
  int image_side{50};

  void validate() const {
    if (!(pair_distance_max > 0.0) || !(corner_margin > 0.0) || !(corner_radius_max > 0.0) ||
        image_side <= 0) {
      throw ValidationError("QC thresholds must be positive");
    }
  }
};

enum class QcKind {
  NoEllipse,
  NoAirwayFlag,
  SingleUnadjusted,
  SingleAdjusted,
  OddCount,
  PairTooFar,
  DegeneratePair,
  SinglePair,
  MultiPair,
};

inline constexpr std::array<QcKind, 9> kAllQcKinds{
    QcKind::NoEllipse,  QcKind::NoAirwayFlag,   QcKind::SingleUnadjusted,
    QcKind::SingleAdjusted, QcKind::OddCount,   QcKind::PairTooFar,
    QcKind::DegeneratePair, QcKind::SinglePair, QcKind::MultiPair};

constexpr std::string_view to_string(QcKind k) {
  switch (k) {
    case QcKind::NoEllipse: return "NoEllipse";
    case QcKind::NoAirwayFlag: return "NoAirwayFlag";
    case QcKind::SingleUnadjusted: return "SingleUnadjusted";
    case QcKind::SingleAdjusted: return "SingleAdjusted";
    case QcKind::OddCount: return "OddCount";
    case QcKind::PairTooFar: return "PairTooFar";
    case QcKind::DegeneratePair: return "DegeneratePair";
    case QcKind::SinglePair: return "SinglePair";
    case QcKind::MultiPair: return "MultiPair";
  }
  return "NoEllipse";
}

/// Category of one annotation; `pairs` is the pair count for MultiPair (k >= 2).
struct QcCategory {
  QcKind kind{QcKind::NoEllipse};
  int pairs{0};

  bool usable() const { return kind == QcKind::SinglePair || kind == QcKind::MultiPair; }
  bool operator==(const QcCategory&) const = default;

  std::string label() const {
    if (kind == QcKind::MultiPair) return "MultiPair(" + std::to_string(pairs) + ")";
    return std::string(to_string(kind));
  }
};

struct EllipsePair {
  Ellipse inner;
  Ellipse outer;
};

struct PairedAnnotation {
  std::string annotation_id;
  std::string image_id;
  std::string worker_id;
  std::vector<EllipsePair> pairs;
  QcCategory category;
};

inline double center_distance(const Ellipse& a, const Ellipse& b) {
  return std::hypot(a.cx - b.cx, a.cy - b.cy);
}

/// A single small circle near an image corner: the "no airway visible" convention.
inline bool detect_no_airway_flag(const AnnotationRecord& annotation, const QcConfig& config) {
  if (annotation.ellipses.size() != 1) return false;
  const auto& e = annotation.ellipses.front();
  if (e.rx > config.corner_radius_max || e.ry > config.corner_radius_max) return false;
  const double side = config.image_side;
  for (const double x : {0.0, side}) {
    for (const double y : {0.0, side}) {
      if (std::max(std::abs(e.cx - x), std::abs(e.cy - y)) <= config.corner_margin) return true;
    }
  }
  return false;
}

struct PairingOutcome {
  std::vector<EllipsePair> pairs;
  double max_distance{0.0};
  bool too_far{false};
};

namespace detail {

inline auto ellipse_key(const Ellipse& e) {
  return std::make_tuple(e.cx, e.cy, e.rx, e.ry, e.theta, e.adjusted,
                         static_cast<int>(e.kind_hint));
}

}  // namespace detail

/// Greedy matching: repeatedly take the unmatched pair with the smallest centre
/// distance. Inputs are canonically ordered first, so the result does not depend on
/// the order in which ellipses were drawn. Fails (too_far) if any chosen pair is
/// farther apart than pair_distance_max.
inline PairingOutcome pair_ellipses(std::vector<Ellipse> ellipses, const QcConfig& config) {
  if (ellipses.empty() || ellipses.size() % 2 != 0) {
    throw ValidationError("pair_ellipses requires a nonzero even number of ellipses");
  }
  std::sort(ellipses.begin(), ellipses.end(), [](const Ellipse& a, const Ellipse& b) {
    return detail::ellipse_key(a) < detail::ellipse_key(b);
  });

  struct Candidate {
    double distance;
    std::size_t a;
    std::size_t b;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < ellipses.size(); ++i) {
    for (std::size_t j = i + 1; j < ellipses.size(); ++j) {
      candidates.push_back({center_distance(ellipses[i], ellipses[j]), i, j});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& x, const Candidate& y) {
                     return std::tie(x.distance, x.a, x.b) < std::tie(y.distance, y.a, y.b);
                   });

  PairingOutcome out;
  std::vector<bool> used(ellipses.size(), false);
  for (const auto& c : candidates) {
    if (used[c.a] || used[c.b]) continue;
    used[c.a] = used[c.b] = true;
    const auto& ea = ellipses[c.a];
    const auto& eb = ellipses[c.b];
    const bool a_inner = ea.rx * ea.ry <= eb.rx * eb.ry;
    out.pairs.push_back(a_inner ? EllipsePair{ea, eb} : EllipsePair{eb, ea});
    out.max_distance = std::max(out.max_distance, c.distance);
  }
  out.too_far = out.max_distance > config.pair_distance_max;
  return out;
}

struct QcResult {
  QcCategory category;
  std::vector<EllipsePair> pairs;  // populated for even counts that paired
};

inline QcResult qc_annotation(const AnnotationRecord& annotation, const QcConfig& config) {
  const auto n = annotation.ellipses.size();
  if (n == 0) return {{QcKind::NoEllipse, 0}, {}};
  if (detect_no_airway_flag(annotation, config)) return {{QcKind::NoAirwayFlag, 0}, {}};
  if (n == 1) {
    return {{annotation.ellipses.front().adjusted ? QcKind::SingleAdjusted
                                                  : QcKind::SingleUnadjusted,
             0},
            {}};
  }
  if (n % 2 != 0) return {{QcKind::OddCount, 0}, {}};

  auto pairing = pair_ellipses(annotation.ellipses, config);
  if (pairing.too_far) return {{QcKind::PairTooFar, 0}, std::move(pairing.pairs)};
  for (const auto& p : pairing.pairs) {
    const bool zero = !(p.inner.rx > 0.0 && p.inner.ry > 0.0 && p.outer.rx > 0.0 &&
                        p.outer.ry > 0.0);
    if (zero || p.inner.rx * p.inner.ry == p.outer.rx * p.outer.ry) {
      return {{QcKind::DegeneratePair, 0}, std::move(pairing.pairs)};
    }
  }
  const int k = static_cast<int>(pairing.pairs.size());
  if (k == 1) return {{QcKind::SinglePair, 1}, std::move(pairing.pairs)};
  return {{QcKind::MultiPair, k}, std::move(pairing.pairs)};
}

/// Decision order: empty, no-airway flag, single (adjusted or not), odd, then pairing.
inline QcCategory classify(const AnnotationRecord& annotation, const QcConfig& config) {
  return qc_annotation(annotation, config).category;
}

/// Counts per category; MultiPair is broken down by pair count.
struct QcTally {
  std::map<QcKind, std::size_t> by_kind;
  std::map<int, std::size_t> multi_pair_by_k;
  std::size_t total{0};

  void add(const QcCategory& c) {
    ++by_kind[c.kind];
    if (c.kind == QcKind::MultiPair) ++multi_pair_by_k[c.pairs];
    ++total;
  }
  std::size_t count(QcKind k) const {
    const auto it = by_kind.find(k);
    return it == by_kind.end() ? 0 : it->second;
  }
  std::size_t usable() const { return count(QcKind::SinglePair) + count(QcKind::MultiPair); }
  std::size_t unusable() const { return total - usable(); }

  json to_json() const {
    json counts = json::object();
    for (const auto k : kAllQcKinds) counts[std::string(to_string(k))] = count(k);
    json multi = json::object();
    for (const auto& [k, n] : multi_pair_by_k) multi[std::to_string(k)] = n;
    return json{{"total", total},
                {"usable", usable()},
                {"unusable", unusable()},
                {"counts", counts},
                {"multi_pair_by_k", multi}};
  }
};

struct QcRow {
  std::string annotation_id;
  std::string image_id;
  std::string worker_id;
  QcCategory category;
  std::size_t n_ellipses{0};
  std::size_t n_pairs{0};
};

struct FilterResult {
  std::vector<PairedAnnotation> usable;
  QcTally tally;
  std::vector<QcRow> rows;  // one per input, input order
};

/// Partitions annotations into usable (SinglePair/MultiPair) and tallies everything.
inline FilterResult filter_usable(const std::vector<AnnotationRecord>& annotations,
                                  const QcConfig& config) {
  config.validate();
  FilterResult out;
  for (const auto& a : annotations) {
    auto r = qc_annotation(a, config);
    out.tally.add(r.category);
    const std::size_t n_pairs = r.category.usable() ? r.pairs.size() : 0;
    out.rows.push_back({a.annotation_id, a.image_id, a.worker_id, r.category,
                        a.ellipses.size(), n_pairs});
    if (r.category.usable()) {
      out.usable.push_back(
          {a.annotation_id, a.image_id, a.worker_id, std::move(r.pairs), r.category});
    }
  }
  return out;
}

inline void write_qc_report(const FilterResult& result, const QcConfig& config,
                            const std::filesystem::path& csv_path,
                            const std::filesystem::path& json_path) {
  {
    std::ofstream out(csv_path, std::ios::trunc);
    if (!out) throw Error("cannot write " + csv_path.string());
    out << "annotation_id,image_id,worker_id,category,n_ellipses,n_pairs\n";
    for (const auto& r : result.rows) {
      out << r.annotation_id << ',' << r.image_id << ',' << r.worker_id << ','
          << r.category.label() << ',' << r.n_ellipses << ',' << r.n_pairs << '\n';
    }
  }
  json summary = result.tally.to_json();
  summary["config"] = {{"pair_distance_max", config.pair_distance_max},
                       {"corner_margin", config.corner_margin},
                       {"corner_radius_max", config.corner_radius_max},
                       {"image_side", config.image_side}};
  std::ofstream out(json_path, std::ios::trunc);
  if (!out) throw Error("cannot write " + json_path.string());
  out << summary.dump(2) << '\n';
}

}  // namespace airway_crowd
