#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

#include "airway_crowd/geometry.hpp"
#include "airway_crowd/volume.hpp"

namespace airway_crowd {

/// Free parameter of the cubic-convolution kernel; -0.5 reproduces quadratics.
inline constexpr double kKeysA = -0.5;

/// Keys cubic-convolution kernel W(x).
constexpr double keys_kernel(double x, double a = kKeysA) {
  const double ax = x < 0.0 ? -x : x;
  if (ax <= 1.0) return ((a + 2.0) * ax - (a + 3.0)) * ax * ax + 1.0;
  if (ax < 2.0) return ((a * ax - 5.0 * a) * ax + 8.0 * a) * ax - 4.0 * a;
  return 0.0;
}

/// Weights for lattice offsets {-1, 0, +1, +2} given fractional position t in [0, 1).
inline std::array<double, 4> keys_weights(double t, double a = kKeysA) {
  return {keys_kernel(1.0 + t, a), keys_kernel(t, a), keys_kernel(1.0 - t, a),
          keys_kernel(2.0 - t, a)};
}

/// Separable tricubic (Keys, a = -0.5) sample at a continuous voxel coordinate.
/// Neighbour indices outside the grid are clamped to the nearest edge voxel.
inline double sample_tricubic(const CtVolume& volume, const Vec3& p) {
  const auto& dims = volume.dims();
  std::array<std::array<std::size_t, 4>, 3> idx{};
  std::array<std::array<double, 4>, 3> w{};
  for (std::size_t a = 0; a < 3; ++a) {
    const double hi = static_cast<double>(dims[a]) + 1.0;
    const double c = std::clamp(p[a], -2.0, hi);
    const double base = std::floor(c);
    w[a] = keys_weights(c - base);
    const auto b = static_cast<std::int64_t>(base);
    const auto last = static_cast<std::int64_t>(dims[a]) - 1;
    for (std::int64_t k = 0; k < 4; ++k) {
      idx[a][k] = static_cast<std::size_t>(std::clamp<std::int64_t>(b - 1 + k, 0, last));
    }
  }

  double acc = 0.0;
  for (std::size_t kz = 0; kz < 4; ++kz) {
    if (w[2][kz] == 0.0) continue;
    double plane = 0.0;
    for (std::size_t ky = 0; ky < 4; ++ky) {
      if (w[1][ky] == 0.0) continue;
      double row = 0.0;
      for (std::size_t kx = 0; kx < 4; ++kx) {
        if (w[0][kx] == 0.0) continue;
        row += w[0][kx] * volume.at(idx[0][kx], idx[1][ky], idx[2][kz]);
      }
      plane += w[1][ky] * row;
    }
    acc += w[2][kz] * plane;
  }
  return acc;
}

}  // namespace airway_crowd
