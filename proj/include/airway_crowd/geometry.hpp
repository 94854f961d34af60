#pragma once

#include <array>
#include <cmath>
#include <utility>

#include "airway_crowd/errors.hpp"

namespace airway_crowd {

/// Plain 3-vector used for voxel coordinates, directions and spacings.
struct Vec3 {
  double x{0.0};
  double y{0.0};
  double z{0.0};

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  constexpr bool operator==(const Vec3&) const = default;

  constexpr double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

/// Component-wise product and quotient (voxel <-> mm conversions).
constexpr Vec3 hadamard(const Vec3& a, const Vec3& b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }
constexpr Vec3 divide(const Vec3& a, const Vec3& b) { return {a.x / b.x, a.y / b.y, a.z / b.z}; }

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalize(const Vec3& v) {
  const double n = norm(v);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw ValidationError("cannot normalize a zero-length vector");
  }
  return v / n;
}

/// In-plane orthonormal frame for a slice plane.
struct PlaneBasis {
  Vec3 u;
  Vec3 v;
};

/// Deterministic right-handed frame {u, v, normal} for a unit plane normal.
///
/// u = normalize(normal x k) with k = +z, or k = +y when the normal is within
/// ~2.6 degrees of the z axis; v = normal x u. Regenerating a slice with the
/// same normal always yields the same in-plane orientation.
inline PlaneBasis plane_basis(const Vec3& normal) {
  const double n = norm(normal);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw ValidationError("plane_basis: zero-norm normal");
  }
  if (std::abs(n - 1.0) > 1e-9) {
    throw ValidationError("plane_basis: normal must be a unit vector");
  }
  constexpr Vec3 kUp{0.0, 0.0, 1.0};
  constexpr Vec3 kFallback{0.0, 1.0, 0.0};
  const Vec3 k = std::abs(dot(normal, kUp)) > 0.999 ? kFallback : kUp;
  const Vec3 u = normalize(cross(normal, k));
  const Vec3 v = cross(normal, u);
  return {u, v};
}

}  // namespace airway_crowd
