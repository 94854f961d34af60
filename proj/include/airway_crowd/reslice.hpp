#pragma once

// Slice generation: four 2D views per airway site, tricubic sampling,
// fixed Hounsfield window.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "airway_crowd/errors.hpp"
#include "airway_crowd/geometry.hpp"
#include "airway_crowd/interpolation.hpp"
#include "airway_crowd/text.hpp"
#include "airway_crowd/volume.hpp"

namespace airway_crowd {

struct SliceConfig {
  int side{50};
  double window_lo{-950.0};
  double window_hi{550.0};
  double sample_step{1.0};  // in units of the volume's minimum spacing

  void validate() const {
    if (side < 2) throw ValidationError("slice side must be >= 2");
    if (!(window_lo < window_hi)) throw ValidationError("window_lo must be < window_hi");
    if (!(sample_step > 0.0)) throw ValidationError("sample_step must be > 0");
  }
};

enum class ViewKind { Original, Sagittal, Coronal, Axial };

inline constexpr std::array<ViewKind, 4> kAllViews{ViewKind::Original, ViewKind::Sagittal,
                                                   ViewKind::Coronal, ViewKind::Axial};

constexpr std::string_view to_string(ViewKind v) {
  switch (v) {
    case ViewKind::Original: return "original";
    case ViewKind::Sagittal: return "sagittal";
    case ViewKind::Coronal: return "coronal";
    case ViewKind::Axial: return "axial";
  }
  return "original";
}

inline ViewKind parse_view(std::string_view s) {
  for (const auto v : kAllViews) {
    if (to_string(v) == s) return v;
  }
  throw FormatError("unknown view '" + std::string(s) + "'");
}

/// Plane normal for a view: the site orientation for Original, otherwise x/y/z.
inline Vec3 view_normal(ViewKind view, const Vec3& orientation) {
  switch (view) {
    case ViewKind::Original: return normalize(orientation);
    case ViewKind::Sagittal: return {1.0, 0.0, 0.0};
    case ViewKind::Coronal: return {0.0, 1.0, 0.0};
    case ViewKind::Axial: return {0.0, 0.0, 1.0};
  }
  return {0.0, 0.0, 1.0};
}

inline std::string make_image_id(std::string_view site_id, ViewKind view) {
  return std::string(site_id) + "_" + std::string(to_string(view));
}

struct SliceImage {
  std::string image_id;
  std::string site_id;
  ViewKind view{ViewKind::Original};
  int side{0};
  std::vector<std::uint8_t> pixels;  // side*side, row-major, (0,0) top-left
  Vec3 origin;                       // centre, continuous voxel coordinates
  Vec3 u;                            // column direction (world, unit)
  Vec3 v;                            // row direction (world, unit)
  double sample_step_mm{0.0};        // pixel edge length

  std::uint8_t at(int col, int row) const {
    return pixels[static_cast<std::size_t>(row) * side + col];
  }
};

/// Linear map of [window_lo, window_hi] to [0, 255], clamped, rounded half away from zero.
inline std::uint8_t window_hu(double value, const SliceConfig& config) {
  if (std::isnan(value)) return 0;
  const double c = std::clamp(value, config.window_lo, config.window_hi);
  const double scaled = (c - config.window_lo) / (config.window_hi - config.window_lo) * 255.0;
  return static_cast<std::uint8_t>(std::clamp(std::round(scaled), 0.0, 255.0));
}

/// Renders one view. Pixel (i, j) samples
///   c + (i - (side-1)/2) * step * u + (j - (side-1)/2) * step * v
/// where step = sample_step * min_spacing in mm, converted to voxel offsets per axis.
inline SliceImage extract_slice(const CtVolume& volume, const AirwaySite& site, ViewKind view,
                                const SliceConfig& config) {
  config.validate();
  if (!volume.contains(site.location)) {
    throw ValidationError("site " + site.site_id + " lies outside the volume");
  }
  const Vec3 normal = view_normal(view, site.orientation);
  const PlaneBasis basis = plane_basis(normal);
  const double step_mm = config.sample_step * volume.min_spacing();
  const Vec3 du = divide(basis.u * step_mm, volume.spacing());
  const Vec3 dv = divide(basis.v * step_mm, volume.spacing());
  const double half = (config.side - 1) / 2.0;

  SliceImage img;
  img.image_id = make_image_id(site.site_id, view);
  img.site_id = site.site_id;
  img.view = view;
  img.side = config.side;
  img.origin = site.location;
  img.u = basis.u;
  img.v = basis.v;
  img.sample_step_mm = step_mm;
  img.pixels.resize(static_cast<std::size_t>(config.side) * config.side);

  for (int j = 0; j < config.side; ++j) {
    const Vec3 row_origin = site.location + dv * (j - half);
    for (int i = 0; i < config.side; ++i) {
      const Vec3 p = row_origin + du * (i - half);
      img.pixels[static_cast<std::size_t>(j) * config.side + i] =
          window_hu(sample_tricubic(volume, p), config);
    }
  }
  return img;
}

/// One image per view, in kAllViews order.
inline std::vector<SliceImage> generate_site_images(const CtVolume& volume,
                                                    const AirwaySite& site,
                                                    const SliceConfig& config) {
  std::vector<SliceImage> out;
  out.reserve(kAllViews.size());
  for (const auto view : kAllViews) out.push_back(extract_slice(volume, site, view, config));
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

struct ManifestEntry {
  std::string image_id;
  std::string site_id;
  ViewKind view{ViewKind::Original};
  Vec3 origin;
  Vec3 u;
  Vec3 v;
  double sample_step_mm{0.0};
};

inline constexpr std::string_view kManifestHeader =
    "image_id,site_id,view,plane_origin_xyz,u_xyz,v_xyz,sample_step_mm";

inline ManifestEntry manifest_entry(const SliceImage& img) {
  return {img.image_id, img.site_id, img.view, img.origin, img.u, img.v, img.sample_step_mm};
}

namespace detail {

inline std::string format_xyz(const Vec3& p) {
  return text::format_double(p.x) + " " + text::format_double(p.y) + " " +
         text::format_double(p.z);
}

inline Vec3 parse_xyz(std::string_view s) {
  const auto t = text::tokens(s);
  if (t.size() != 3) throw FormatError("expected 'x y z' triple, got '" + std::string(s) + "'");
  return {text::parse_double(t[0], "x"), text::parse_double(t[1], "y"),
          text::parse_double(t[2], "z")};
}

}  // namespace detail

inline void write_manifest(const std::vector<ManifestEntry>& entries,
                           const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << kManifestHeader << '\n';
  for (const auto& e : entries) {
    out << e.image_id << ',' << e.site_id << ',' << to_string(e.view) << ','
        << detail::format_xyz(e.origin) << ',' << detail::format_xyz(e.u) << ','
        << detail::format_xyz(e.v) << ',' << text::format_double(e.sample_step_mm) << '\n';
  }
}

inline std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open manifest: " + path.string());
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != kManifestHeader) {
    throw FormatError(path.string() + ": unexpected manifest header");
  }
  std::vector<ManifestEntry> out;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto f = text::split(text::trim(line), ',');
    if (f.size() != 7) throw FormatError(path.string() + ": manifest rows need 7 fields");
    ManifestEntry e;
    e.image_id = std::string(f[0]);
    e.site_id = std::string(f[1]);
    e.view = parse_view(f[2]);
    e.origin = detail::parse_xyz(f[3]);
    e.u = detail::parse_xyz(f[4]);
    e.v = detail::parse_xyz(f[5]);
    e.sample_step_mm = text::parse_double(f[6], "sample_step_mm");
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace airway_crowd
