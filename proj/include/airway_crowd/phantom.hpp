#pragma once

// Synthetic tube phantoms: an air lumen inside a soft-tissue wall, embedded in
// lung-like background. Geometry is known analytically, so every rendered view
// has exact ground truth.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "airway_crowd/crowd_sim.hpp"
#include "airway_crowd/geometry.hpp"
#include "airway_crowd/reslice.hpp"
#include "airway_crowd/volume.hpp"

namespace airway_crowd {

struct TubeSpec {
  std::string site_id;
  Vec3 center;             // voxel coordinates
  Vec3 direction{0, 0, 1};  // unit axis
  double lumen_radius_mm{2.0};
  double wall_radius_mm{3.0};
  double half_length_mm{1e9};
};

struct PhantomSpec {
  Dims dims{64, 64, 32};
  Vec3 spacing{1.0, 1.0, 1.0};
  double background_hu{-500.0};
  double lumen_hu{-900.0};
  double wall_hu{0.0};
  int supersample{1};  // sub-samples per axis for partial-volume averaging
  std::vector<TubeSpec> tubes;
};

namespace detail {

/// 0 = outside, 1 = wall, 2 = lumen.
inline int tube_region(const TubeSpec& t, const Vec3& p_mm, const Vec3& c_mm) {
  const Vec3 d = p_mm - c_mm;
  const double axial = dot(d, t.direction);
  if (std::abs(axial) > t.half_length_mm) return 0;
  const Vec3 radial = d - t.direction * axial;
  const double r2 = dot(radial, radial);
  if (r2 <= t.lumen_radius_mm * t.lumen_radius_mm) return 2;
  if (r2 <= t.wall_radius_mm * t.wall_radius_mm) return 1;
  return 0;
}

}  // namespace detail

/// Voxelizes the phantom. Each voxel is the average HU of its sub-samples; later
/// tubes overwrite earlier ones where they overlap.
inline CtVolume generate_phantom(const PhantomSpec& spec) {
  if (spec.supersample < 1) throw ValidationError("supersample must be >= 1");
  const auto& d = spec.dims;
  std::vector<double> hu(d[0] * d[1] * d[2], spec.background_hu);
  const int s = spec.supersample;

  for (const auto& tube : spec.tubes) {
    const TubeSpec t{tube.site_id, tube.center, normalize(tube.direction), tube.lumen_radius_mm,
                     tube.wall_radius_mm, tube.half_length_mm};
    const Vec3 c_mm = voxel_to_mm(t.center, spec.spacing);
    // Bounding box in voxels: the whole volume for long tubes, else a cube.
    const double reach = std::min(t.half_length_mm, 1e6) + t.wall_radius_mm + 1.0;
    std::array<std::size_t, 3> lo{};
    std::array<std::size_t, 3> hi{};
    for (std::size_t a = 0; a < 3; ++a) {
      const double r_vox = reach / spec.spacing[a];
      lo[a] = static_cast<std::size_t>(std::max(0.0, std::floor(t.center[a] - r_vox)));
      hi[a] = static_cast<std::size_t>(
          std::min(static_cast<double>(d[a] - 1), std::ceil(t.center[a] + r_vox)));
    }
    for (std::size_t z = lo[2]; z <= hi[2]; ++z) {
      for (std::size_t y = lo[1]; y <= hi[1]; ++y) {
        for (std::size_t x = lo[0]; x <= hi[0]; ++x) {
          int n_lumen = 0;
          int n_wall = 0;
          for (int sz = 0; sz < s; ++sz) {
            for (int sy = 0; sy < s; ++sy) {
              for (int sx = 0; sx < s; ++sx) {
                const Vec3 p{x + (sx + 0.5) / s - 0.5, y + (sy + 0.5) / s - 0.5,
                             z + (sz + 0.5) / s - 0.5};
                const int region = detail::tube_region(t, voxel_to_mm(p, spec.spacing), c_mm);
                n_lumen += region == 2;
                n_wall += region == 1;
              }
            }
          }
          if (n_lumen + n_wall == 0) continue;
          const double total = static_cast<double>(s) * s * s;
          auto& v = hu[(z * d[1] + y) * d[0] + x];
          const double rest = (total - n_lumen - n_wall) / total;
          v = rest * v + (n_lumen * spec.lumen_hu + n_wall * spec.wall_hu) / total;
        }
      }
    }
  }

  std::vector<std::int16_t> data(hu.size());
  for (std::size_t i = 0; i < hu.size(); ++i) {
    data[i] = static_cast<std::int16_t>(std::lround(std::clamp(hu[i], -32768.0, 32767.0)));
  }
  return CtVolume(spec.dims, spec.spacing, std::move(data));
}

/// Expert site for a tube: its centre, axis and true cross-sectional areas in mm^2.
inline AirwaySite tube_site(const TubeSpec& t) {
  return {t.site_id, t.center, normalize(t.direction),
          std::numbers::pi * t.lumen_radius_mm * t.lumen_radius_mm,
          std::numbers::pi * t.wall_radius_mm * t.wall_radius_mm};
}

/// Analytic truth for a view: a plane with normal n cuts a cylinder of radius r
/// and axis d in an ellipse with semi-axes r and r / |d.n|, the long axis along the
/// projection of d. Views with |d.n| below `min_cosine` count as not visible.
inline ImageTruth tube_view_truth(const TubeSpec& tube, ViewKind view, double sample_step_mm,
                                  int side = 50, double min_cosine = 0.5) {
  const Vec3 dir = normalize(tube.direction);
  const Vec3 n = view_normal(view, dir);
  const auto basis = plane_basis(n);
  const double cosang = std::abs(dot(dir, n));
  const double c = (side - 1) / 2.0;
  const double du = dot(dir, basis.u);
  const double dv = dot(dir, basis.v);
  const double theta = std::hypot(du, dv) > 1e-12 ? wrap_theta(std::atan2(dv, du)) : 0.0;
  const double stretch = 1.0 / std::max(cosang, 1e-3);

  auto make = [&](double r_mm, KindHint hint) {
    const double r = r_mm / sample_step_mm;
    return Ellipse{c, c, r * stretch, r, theta, true, hint};
  };
  ImageTruth t{make_image_id(tube.site_id, view), cosang >= min_cosine,
               make(tube.lumen_radius_mm, KindHint::Lumen),
               make(tube.wall_radius_mm, KindHint::Wall), side};
  return t;
}

/// Twenty-odd tubes laid out on a grid, each in its own cell, with varied radii and
/// tilts of up to ~35 degrees from z. Deterministic in `seed`.
inline PhantomSpec tube_grid_phantom(int n_tubes, std::uint64_t seed, int cell = 40,
                                     int depth = 40) {
  if (n_tubes < 1) throw ValidationError("need at least one tube");
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_tubes))));
  const int rows = (n_tubes + cols - 1) / cols;
  PhantomSpec spec;
  spec.dims = {static_cast<std::size_t>(cols * cell), static_cast<std::size_t>(rows * cell),
               static_cast<std::size_t>(depth)};
  spec.spacing = {1.0, 1.0, 1.0};
  spec.supersample = 3;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> lumen_r(1.5, 5.0);
  std::uniform_real_distribution<double> thickness(1.0, 3.0);
  std::uniform_real_distribution<double> tilt(0.0, 0.6);
  std::uniform_real_distribution<double> azimuth(0.0, 2.0 * std::numbers::pi);
  for (int i = 0; i < n_tubes; ++i) {
    TubeSpec t;
    char id[32];
    std::snprintf(id, sizeof(id), "tube%02d", i + 1);
    t.site_id = id;
    const int col = i % cols;
    const int row = i / cols;
    t.center = {col * cell + cell / 2.0, row * cell + cell / 2.0, depth / 2.0};
    const double tl = tilt(rng);
    const double az = azimuth(rng);
    t.direction = {std::sin(tl) * std::cos(az), std::sin(tl) * std::sin(az), std::cos(tl)};
    t.lumen_radius_mm = lumen_r(rng);
    t.wall_radius_mm = t.lumen_radius_mm + thickness(rng);
    t.half_length_mm = depth / 2.0 - 2.0;
    spec.tubes.push_back(t);
  }
  return spec;
}

}  // namespace airway_crowd
