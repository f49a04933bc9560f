#include "bxfuse/volume.hpp"

#include <cmath>

#include "bxfuse/errors.hpp"
#include "bxfuse/kernels.hpp"
#include "bxfuse/parallel.hpp"
#include "kernels/kernel_common.hpp"

namespace bxfuse {

Volume3D::Volume3D(std::array<int, 3> dims_, Vec3 spacing_, Vec3 origin_, float fill)
    : dims(dims_), spacing(spacing_), origin(origin_) {
  validate_geometry();
  data.assign(voxel_count(), fill);
}

void Volume3D::validate_geometry() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 2)
      throw DimensionMismatch("volume dims must be >= 2 per axis, got " +
                              std::to_string(dims[a]) + " on axis " + std::to_string(a));
  }
  if (!(spacing.x > 0.0 && spacing.y > 0.0 && spacing.z > 0.0))
    throw Error("volume spacing must be positive on every axis");
  if (!std::isfinite(origin.x) || !std::isfinite(origin.y) || !std::isfinite(origin.z))
    throw Error("volume origin must be finite");
}

void Volume3D::validate_finite() const {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i]))
      throw Error("non-finite intensity at linear index " + std::to_string(i));
  }
}

std::optional<float> Volume3D::sample_trilinear(const Vec3& p) const {
  const Vec3 idx = world_to_index(p);
  kernels::RowMap map{{idx.x, idx.y, idx.z}, {0.0, 0.0, 0.0}};
  const kernels::MovingView view{data.data(), dims[0], dims[1], dims[2]};
  const auto s = kernels::detail::sample_element(view, map, 0);
  if (!s.valid) return std::nullopt;
  return s.value;
}

ResampleResult resample(const Volume3D& moving, const RigidTransform& t,
                        const Volume3D& like, int threads) {
  moving.validate_geometry();
  like.validate_geometry();

  ResampleResult out;
  out.volume = Volume3D(like.dims, like.spacing, like.origin, 0.0f);
  out.mask.assign(like.voxel_count(), 0);

  const auto rot = t.rotation.to_rotation_matrix();
  kernels::RowMap map{};
  // Column of the composite index->index affine map along output x.
  for (int a = 0; a < 3; ++a)
    map.step[a] = rot[a * 3 + 0] * like.spacing.x / moving.spacing[a];

  const kernels::MovingView view{moving.data.data(), moving.dims[0],
                                 moving.dims[1], moving.dims[2]};
  const auto& k = kernels::table();
  const int nx = like.dims[0], ny = like.dims[1], nz = like.dims[2];

  parallel_for(nz, threads, [&](int iz) {
    kernels::RowMap row = map;
    for (int iy = 0; iy < ny; ++iy) {
      const Vec3 row_start = like.index_to_world({0.0, static_cast<double>(iy),
                                                  static_cast<double>(iz)});
      const Vec3 base = moving.world_to_index(apply_point(t, row_start));
      row.base[0] = base.x;
      row.base[1] = base.y;
      row.base[2] = base.z;
      const std::size_t off = out.volume.index(0, iy, iz);
      k.resample_row(view, row, nx, 0.0f, out.volume.data.data() + off,
                     out.mask.data() + off);
    }
  });
  return out;
}

Volume3D downsample2x(const Volume3D& v) {
  for (int a = 0; a < 3; ++a) {
    if (v.dims[a] < 4)
      throw DimensionMismatch("downsample2x needs dims >= 4 per axis");
  }
  const std::array<int, 3> nd{(v.dims[0] + 1) / 2, (v.dims[1] + 1) / 2,
                              (v.dims[2] + 1) / 2};
  Volume3D out(nd, v.spacing * 2.0, v.origin + v.spacing * 0.5);
  for (int oz = 0; oz < nd[2]; ++oz) {
    const int z0 = oz * 2, z1 = std::min(z0 + 2, v.dims[2]);
    for (int oy = 0; oy < nd[1]; ++oy) {
      const int y0 = oy * 2, y1 = std::min(y0 + 2, v.dims[1]);
      for (int ox = 0; ox < nd[0]; ++ox) {
        const int x0 = ox * 2, x1 = std::min(x0 + 2, v.dims[0]);
        double sum = 0.0;
        int count = 0;
        for (int z = z0; z < z1; ++z)
          for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
              sum += v.at(x, y, z);
              ++count;
            }
        out.at(ox, oy, oz) = static_cast<float>(sum / count);
      }
    }
  }
  return out;
}

}  // namespace bxfuse
