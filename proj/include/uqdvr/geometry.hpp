#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace uqdvr {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr double operator[](std::size_t axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  constexpr double& operator[](std::size_t axis) { return axis == 0 ? x : (axis == 1 ? y : z); }

  friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return s * a; }
  friend constexpr bool operator==(Vec3 a, Vec3 b) = default;
};

constexpr double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(Vec3 a) {
  const double n = norm(a);
  if (n == 0.0) throw std::invalid_argument("cannot normalize a zero vector");
  return (1.0 / n) * a;
}

/// Voxel counts along x, y, z. Linear indices are x-fastest.
struct Dims {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;

  constexpr std::size_t count() const { return nx * ny * nz; }
  constexpr std::size_t operator[](std::size_t axis) const { return axis == 0 ? nx : (axis == 1 ? ny : nz); }
  constexpr std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return i + nx * (j + ny * k); }
  constexpr std::array<std::size_t, 3> unravel(std::size_t linear) const {
    return {linear % nx, (linear / nx) % ny, linear / (nx * ny)};
  }
  friend constexpr bool operator==(const Dims&, const Dims&) = default;

  std::string str() const {
    return std::to_string(nx) + "x" + std::to_string(ny) + "x" + std::to_string(nz);
  }
};

/// Placement of a voxel lattice in world space. Voxel (i,j,k) sits at
/// origin + (i*spacing.x, j*spacing.y, k*spacing.z).
struct GridGeometry {
  Dims dims;
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{0.0, 0.0, 0.0};

  Vec3 voxel_position(std::size_t i, std::size_t j, std::size_t k) const {
    return {origin.x + static_cast<double>(i) * spacing.x, origin.y + static_cast<double>(j) * spacing.y,
            origin.z + static_cast<double>(k) * spacing.z};
  }
  Vec3 box_min() const { return origin; }
  Vec3 box_max() const {
    return {origin.x + static_cast<double>(dims.nx - 1) * spacing.x,
            origin.y + static_cast<double>(dims.ny - 1) * spacing.y,
            origin.z + static_cast<double>(dims.nz - 1) * spacing.z};
  }
  double min_spacing() const { return std::min(spacing.x, std::min(spacing.y, spacing.z)); }

  void validate() const {
    if (dims.count() == 0) throw std::invalid_argument("grid dims must be positive, got " + dims.str());
    for (std::size_t a = 0; a < 3; ++a) {
      if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
        throw std::invalid_argument("grid spacing must be positive and finite");
      if (!std::isfinite(origin[a])) throw std::invalid_argument("grid origin must be finite");
    }
  }

  friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

}  // namespace uqdvr
