#pragma once

// 3D scalar image with physical geometry. Volumes are axis-aligned in their
// own world frame; inter-volume orientation lives entirely in RigidTransform.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "bxfuse/geometry.hpp"

namespace bxfuse {

struct Volume3D {
  std::array<int, 3> dims{2, 2, 2};  // voxels per axis
  Vec3 spacing{1.0, 1.0, 1.0};       // mm per voxel
  Vec3 origin{0.0, 0.0, 0.0};        // world position of voxel (0,0,0) center
  std::vector<float> data;           // x-fastest, then y, then z

  Volume3D() : data(8, 0.0f) {}
  Volume3D(std::array<int, 3> dims_, Vec3 spacing_, Vec3 origin_, float fill = 0.0f);

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(iz) * dims[1] + iy) * dims[0] + ix;
  }
  float at(int ix, int iy, int iz) const { return data[index(ix, iy, iz)]; }
  float& at(int ix, int iy, int iz) { return data[index(ix, iy, iz)]; }

  Vec3 index_to_world(const Vec3& idx) const {
    return {origin.x + idx.x * spacing.x, origin.y + idx.y * spacing.y,
            origin.z + idx.z * spacing.z};
  }
  Vec3 world_to_index(const Vec3& p) const {
    return {(p.x - origin.x) / spacing.x, (p.y - origin.y) / spacing.y,
            (p.z - origin.z) / spacing.z};
  }

  /// World position of the grid's geometric center.
  Vec3 world_center() const {
    return index_to_world({0.5 * (dims[0] - 1), 0.5 * (dims[1] - 1),
                           0.5 * (dims[2] - 1)});
  }

  /// Trilinear sample at world point p; empty when the continuous index
  /// leaves [0, dims-1] on any axis.
  std::optional<float> sample_trilinear(const Vec3& p) const;

  /// Throws DimensionMismatch / Error when geometry invariants are violated.
  void validate_geometry() const;
  /// Throws Error when any stored intensity is non-finite.
  void validate_finite() const;
};

struct ResampleResult {
  Volume3D volume;
  std::vector<std::uint8_t> mask;  // 1 where the moving volume covered the voxel
};

/// Resample `moving` onto the grid of `like`. `t` maps the `like` world
/// frame into the moving world frame. Out-of-support voxels are filled with
/// 0 and flagged in the mask. Bit-identical for any `threads` value.
ResampleResult resample(const Volume3D& moving, const RigidTransform& t,
                        const Volume3D& like, int threads = 1);

/// 2x box-filter downsample on all axes (pyramid construction). Edge blocks
/// average whatever voxels exist.
Volume3D downsample2x(const Volume3D& v);

}  // namespace bxfuse
