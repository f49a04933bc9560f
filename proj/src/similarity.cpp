#include "bxfuse/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bxfuse/errors.hpp"
#include "bxfuse/parallel.hpp"

namespace bxfuse {

namespace {

void require_same_geometry(const Volume3D& a, const Volume3D& b) {
  if (a.dims != b.dims)
    throw DimensionMismatch("similarity inputs must share dimensions");
  const auto close = [](const Vec3& u, const Vec3& v) {
    return std::abs(u.x - v.x) < 1e-9 && std::abs(u.y - v.y) < 1e-9 &&
           std::abs(u.z - v.z) < 1e-9;
  };
  if (!close(a.spacing, b.spacing) || !close(a.origin, b.origin))
    throw DimensionMismatch("similarity inputs must share spacing and origin");
}

void require_mask_size(const Volume3D& v, const std::vector<std::uint8_t>& mask) {
  if (!mask.empty() && mask.size() != v.voxel_count())
    throw DimensionMismatch("mask size does not match volume");
}

/// Masked moments with slice-major accumulation: one sink per z-slice,
/// merged in z order, so results are identical for every thread count.
kernels::Moments masked_moments(const Volume3D& fixed, const Volume3D& moved,
                                const std::vector<std::uint8_t>& mask, int threads) {
  const int nx = fixed.dims[0], ny = fixed.dims[1], nz = fixed.dims[2];
  const auto& k = kernels::table();
  std::vector<kernels::MomentSink> slices(nz);
  parallel_for(nz, threads, [&](int iz) {
    kernels::MomentSink& sink = slices[iz];
    for (int iy = 0; iy < ny; ++iy) {
      const std::size_t off = fixed.index(0, iy, iz);
      k.moments_masked_row(fixed.data.data() + off, moved.data.data() + off,
                           mask.empty() ? nullptr : mask.data() + off, nx, sink);
    }
  });
  kernels::MomentSink total;
  for (const auto& s : slices) total += s;
  return kernels::finalize(total);
}

constexpr double kVarianceFloor = 1e-9;

}  // namespace

void SimilarityKind::validate() const {
  if (type == Type::nmi && (bins < 8 || bins > 256))
    throw ConfigError("NMI bins must be in [8, 256], got " + std::to_string(bins));
}

std::string SimilarityKind::name() const {
  switch (type) {
    case Type::ssd: return "ssd";
    case Type::ncc: return "ncc";
    case Type::nmi: return "nmi";
  }
  return "?";
}

SimilarityKind SimilarityKind::parse(const std::string& name, int bins) {
  if (name == "ssd") return ssd();
  if (name == "ncc") return ncc();
  if (name == "nmi") return nmi(bins);
  throw ConfigError("unknown similarity metric: " + name);
}

double mean_ssd_from_moments(const kernels::Moments& m) {
  if (m.n <= 0.0) throw EmptyOverlap("no voxels in mask overlap");
  return m.sdd / m.n;
}

double ncc_from_moments(const kernels::Moments& m) {
  if (m.n <= 0.0) throw EmptyOverlap("no voxels in mask overlap");
  const double var_f = m.sff - m.sf * m.sf / m.n;
  const double var_m = m.smm - m.sm * m.sm / m.n;
  const double scale_f = std::max(m.sff, 1.0);
  const double scale_m = std::max(m.smm, 1.0);
  if (var_f <= kVarianceFloor * scale_f || var_m <= kVarianceFloor * scale_m)
    throw DegenerateImage("intensity constant over mask; NCC undefined");
  const double cov = m.sfm - m.sf * m.sm / m.n;
  return std::clamp(cov / std::sqrt(var_f * var_m), -1.0, 1.0);
}

double ssd(const Volume3D& fixed, const Volume3D& moved,
           const std::vector<std::uint8_t>& mask, int threads) {
  require_same_geometry(fixed, moved);
  require_mask_size(fixed, mask);
  return mean_ssd_from_moments(masked_moments(fixed, moved, mask, threads));
}

double ncc(const Volume3D& fixed, const Volume3D& moved,
           const std::vector<std::uint8_t>& mask, int threads) {
  require_same_geometry(fixed, moved);
  require_mask_size(fixed, mask);
  return ncc_from_moments(masked_moments(fixed, moved, mask, threads));
}

double nmi(const Volume3D& fixed, const Volume3D& moved,
           const std::vector<std::uint8_t>& mask, int bins, int threads) {
  SimilarityKind::nmi(bins).validate();
  require_same_geometry(fixed, moved);
  require_mask_size(fixed, mask);

  const int nx = fixed.dims[0], ny = fixed.dims[1], nz = fixed.dims[2];
  const auto& k = kernels::table();

  float flo = std::numeric_limits<float>::max();
  float fhi = std::numeric_limits<float>::lowest();
  float mlo = flo, mhi = fhi;
  for (int iz = 0; iz < nz; ++iz) {
    for (int iy = 0; iy < ny; ++iy) {
      const std::size_t off = fixed.index(0, iy, iz);
      const std::uint8_t* m = mask.empty() ? nullptr : mask.data() + off;
      k.minmax_masked_row(fixed.data.data() + off, m, nx, flo, fhi);
      k.minmax_masked_row(moved.data.data() + off, m, nx, mlo, mhi);
    }
  }
  if (flo > fhi) throw EmptyOverlap("no voxels in mask overlap");

  // Joint histogram; integer counts keep the merge order-independent.
  const double fw = (fhi > flo) ? bins / (static_cast<double>(fhi) - flo) : 0.0;
  const double mw = (mhi > mlo) ? bins / (static_cast<double>(mhi) - mlo) : 0.0;
  std::vector<std::vector<std::uint64_t>> partial(
      nz, std::vector<std::uint64_t>());
  parallel_for(nz, threads, [&](int iz) {
    auto& h = partial[iz];
    h.assign(static_cast<std::size_t>(bins) * bins, 0);
    for (int iy = 0; iy < ny; ++iy) {
      const std::size_t off = fixed.index(0, iy, iz);
      for (int ix = 0; ix < nx; ++ix) {
        if (!mask.empty() && !mask[off + ix]) continue;
        const int bf = std::min(bins - 1, static_cast<int>((fixed.data[off + ix] - flo) * fw));
        const int bm = std::min(bins - 1, static_cast<int>((moved.data[off + ix] - mlo) * mw));
        ++h[static_cast<std::size_t>(bf) * bins + bm];
      }
    }
  });
  std::vector<std::uint64_t> joint(static_cast<std::size_t>(bins) * bins, 0);
  std::uint64_t total = 0;
  for (const auto& h : partial)
    for (std::size_t i = 0; i < joint.size(); ++i) {
      joint[i] += h[i];
      total += h[i];
    }
  if (total == 0) throw EmptyOverlap("no voxels in mask overlap");

  const double inv_n = 1.0 / static_cast<double>(total);
  double hf = 0.0, hm = 0.0, hj = 0.0;
  for (int bf = 0; bf < bins; ++bf) {
    std::uint64_t row = 0;
    for (int bm = 0; bm < bins; ++bm) {
      const std::uint64_t c = joint[static_cast<std::size_t>(bf) * bins + bm];
      row += c;
      if (c) {
        const double p = c * inv_n;
        hj -= p * std::log(p);
      }
    }
    if (row) {
      const double p = row * inv_n;
      hf -= p * std::log(p);
    }
  }
  for (int bm = 0; bm < bins; ++bm) {
    std::uint64_t col = 0;
    for (int bf = 0; bf < bins; ++bf)
      col += joint[static_cast<std::size_t>(bf) * bins + bm];
    if (col) {
      const double p = col * inv_n;
      hm -= p * std::log(p);
    }
  }
  // Constant-on-mask images: fully predictable relation, defined as 2.
  if (hj <= 0.0) return 2.0;
  return (hf + hm) / hj;
}

double evaluate(const SimilarityKind& kind, const Volume3D& fixed,
                const Volume3D& moved, const std::vector<std::uint8_t>& mask,
                int threads) {
  kind.validate();
  switch (kind.type) {
    case SimilarityKind::Type::ssd: return ssd(fixed, moved, mask, threads);
    case SimilarityKind::Type::ncc: return ncc(fixed, moved, mask, threads);
    case SimilarityKind::Type::nmi: return nmi(fixed, moved, mask, kind.bins, threads);
  }
  throw ConfigError("unhandled similarity kind");
}

kernels::Moments transformed_moments(const Volume3D& fixed, const Volume3D& moving,
                                     const RigidTransform& t, int threads) {
  const auto rot = t.rotation.to_rotation_matrix();
  kernels::RowMap map{};
  for (int a = 0; a < 3; ++a)
    map.step[a] = rot[a * 3 + 0] * fixed.spacing.x / moving.spacing[a];

  const kernels::MovingView view{moving.data.data(), moving.dims[0],
                                 moving.dims[1], moving.dims[2]};
  const auto& k = kernels::table();
  const int nx = fixed.dims[0], ny = fixed.dims[1], nz = fixed.dims[2];

  std::vector<kernels::MomentSink> slices(nz);
  parallel_for(nz, threads, [&](int iz) {
    kernels::RowMap row = map;
    kernels::MomentSink& sink = slices[iz];
    for (int iy = 0; iy < ny; ++iy) {
      const Vec3 row_start = fixed.index_to_world({0.0, static_cast<double>(iy),
                                                   static_cast<double>(iz)});
      const Vec3 base = moving.world_to_index(apply_point(t, row_start));
      row.base[0] = base.x;
      row.base[1] = base.y;
      row.base[2] = base.z;
      k.moments_resample_row(fixed.data.data() + fixed.index(0, iy, iz), view,
                             row, nx, sink);
    }
  });
  kernels::MomentSink total;
  for (const auto& s : slices) total += s;
  return kernels::finalize(total);
}

}  // namespace bxfuse
