#include "bxfuse/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "bxfuse/errors.hpp"
#include "bxfuse/parallel.hpp"
#include "bxfuse/rng.hpp"

namespace bxfuse {

namespace {

/// Standard normal from a (seed, counter) pair via Box-Muller; stateless so
/// parallel rendering order cannot matter.
inline double counter_gauss(std::uint64_t seed, std::uint64_t counter) {
  const std::uint64_t h1 = mix64(seed ^ mix64(counter));
  const std::uint64_t h2 = mix64(h1 ^ 0xd1b54a32d192ed03ULL);
  const double u1 = uniform01(h1);
  const double u2 = uniform01(h2);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

double smoothstep01(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

/// 1 inside the structure, 0 outside, smooth across +-edge_width of the
/// signed distance.
double inside_weight(double signed_dist_mm, double edge_width_mm) {
  if (edge_width_mm <= 0.0) return signed_dist_mm <= 0.0 ? 1.0 : 0.0;
  return 1.0 - smoothstep01((signed_dist_mm + edge_width_mm) / (2.0 * edge_width_mm));
}

/// Approximate signed distance to an axis-aligned ellipsoid surface
/// (first-order: (rho - 1) / |grad rho|), negative inside.
double ellipsoid_signed_dist(const Vec3& p, const Vec3& c, const Vec3& a) {
  const double ux = (p.x - c.x) / a.x;
  const double uy = (p.y - c.y) / a.y;
  const double uz = (p.z - c.z) / a.z;
  const double rho = std::sqrt(ux * ux + uy * uy + uz * uz);
  if (rho < 1e-9) return -std::min({a.x, a.y, a.z});
  const double gx = ux / a.x, gy = uy / a.y, gz = uz / a.z;
  const double grad = std::sqrt(gx * gx + gy * gy + gz * gz) / rho;
  return (rho - 1.0) / grad;
}

double point_segment_dist(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.dot(ab);
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + ab * t)).norm();
}

/// Smooth value noise in scene coordinates: Gaussian lattice values hashed
/// from (seed, cell), blended with a C1 fade. Roughly unit variance.
double value_noise(std::uint64_t seed, const Vec3& p, double scale_mm) {
  const Vec3 q = p / scale_mm;
  const int ix = static_cast<int>(std::floor(q.x));
  const int iy = static_cast<int>(std::floor(q.y));
  const int iz = static_cast<int>(std::floor(q.z));
  auto lattice = [&](int dx, int dy, int dz) {
    const std::uint64_t key =
        ((static_cast<std::uint64_t>(ix + dx + 8192) * 16384 +
          static_cast<std::uint64_t>(iy + dy + 8192)) *
             16384 +
         static_cast<std::uint64_t>(iz + dz + 8192));
    const std::uint64_t h1 = mix64(seed ^ mix64(key));
    const std::uint64_t h2 = mix64(h1 ^ 0x94d049bb133111ebULL);
    return std::sqrt(-2.0 * std::log(uniform01(h1))) *
           std::cos(2.0 * kPi * uniform01(h2));
  };
  auto fade = [](double t) { return t * t * (3.0 - 2.0 * t); };
  const double fx = fade(q.x - ix), fy = fade(q.y - iy), fz = fade(q.z - iz);
  auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
  const double v00 = lerp(lattice(0, 0, 0), lattice(1, 0, 0), fx);
  const double v10 = lerp(lattice(0, 1, 0), lattice(1, 1, 0), fx);
  const double v01 = lerp(lattice(0, 0, 1), lattice(1, 0, 1), fx);
  const double v11 = lerp(lattice(0, 1, 1), lattice(1, 1, 1), fx);
  return lerp(lerp(v00, v10, fy), lerp(v01, v11, fy), fz);
}

struct Scene {
  Vec3 center;
  Vec3 semi_axes;
  std::vector<Vec3> calcifications;
  std::vector<double> calc_radii;
  std::optional<NeedleSpec> needle;
  std::uint64_t texture_seed = 0;
};

/// Noise-free tissue/structure rendering at world point p (base scene frame).
struct SceneSample {
  double tissue;     // background/gland mix, gets speckle
  double structure;  // bright specular structures, speckle-free
};

SceneSample sample_scene(const Scene& sc, const PhantomConfig& cfg, const Vec3& p) {
  SceneSample out;
  const double contrast = cfg.gland_level - cfg.background_level;
  const double gland_w =
      inside_weight(ellipsoid_signed_dist(p, sc.center, sc.semi_axes),
                    cfg.smoothing_radius_mm);
  out.tissue = cfg.background_level + contrast * gland_w;

  // Hypoechoic transition zone, offset anteriorly toward the base. Scaled by
  // the gland contrast so a flat scene stays flat.
  if (cfg.zone_contrast != 0.0) {
    const Vec3 tz_center = sc.center + Vec3{0.0, 0.22 * sc.semi_axes.y,
                                            0.18 * sc.semi_axes.z};
    const Vec3 tz_axes{0.58 * sc.semi_axes.x, 0.52 * sc.semi_axes.y,
                       0.55 * sc.semi_axes.z};
    const double tz_w = inside_weight(ellipsoid_signed_dist(p, tz_center, tz_axes),
                                      cfg.smoothing_radius_mm);
    out.tissue -= cfg.zone_contrast * contrast * tz_w * gland_w;
  }

  // Anatomy-locked echotexture inside the gland.
  if (cfg.texture_contrast != 0.0 && gland_w > 0.0) {
    out.tissue += cfg.texture_contrast * contrast * gland_w *
                  value_noise(sc.texture_seed, p, cfg.texture_scale_mm);
  }

  out.structure = 0.0;
  for (std::size_t i = 0; i < sc.calcifications.size(); ++i) {
    const double r = sc.calc_radii[i];
    const double d = (p - sc.calcifications[i]).norm() - r;
    const double w = inside_weight(d, std::min(cfg.smoothing_radius_mm, r));
    out.structure = std::max(out.structure, cfg.calc_level * w);
  }
  if (sc.needle) {
    const double d = point_segment_dist(p, sc.needle->entry, sc.needle->tip) -
                     sc.needle->radius_mm;
    const double w =
        inside_weight(d, std::min(cfg.smoothing_radius_mm, sc.needle->radius_mm));
    out.structure = std::max(out.structure, sc.needle->level * w);
  }
  return out;
}

// Separable [1,2,1]/4 smoothing shrinks an iid unit-variance field's std by
// exactly (6/16)^(3/2); used to renormalize to the requested sigma.
const double kSmoothedStd = std::pow(6.0 / 16.0, 1.5);

/// Smoothed multiplicative speckle field, mean 1, std sigma.
std::vector<float> speckle_field(const std::array<int, 3>& dims, double sigma,
                                 std::uint64_t seed, int threads) {
  const int nx = dims[0], ny = dims[1], nz = dims[2];
  const std::size_t n = static_cast<std::size_t>(nx) * ny * nz;
  std::vector<float> a(n), b(n);

  parallel_for(nz, threads, [&](int iz) {
    std::size_t i = static_cast<std::size_t>(iz) * ny * nx;
    for (int iy = 0; iy < ny; ++iy)
      for (int ix = 0; ix < nx; ++ix, ++i)
        a[i] = static_cast<float>(counter_gauss(seed, i));
  });

  // Three axis passes with clamped borders.
  auto blur_axis = [&](const std::vector<float>& src, std::vector<float>& dst,
                       int axis) {
    const int strides[3] = {1, nx, nx * ny};
    const int stride = strides[axis];
    const int extent = dims[axis];
    parallel_for(nz, threads, [&](int iz) {
      for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
          const std::size_t i =
              (static_cast<std::size_t>(iz) * ny + iy) * nx + ix;
          const int pos = (axis == 0) ? ix : (axis == 1 ? iy : iz);
          const std::size_t lo = (pos > 0) ? i - stride : i;
          const std::size_t hi = (pos + 1 < extent) ? i + stride : i;
          dst[i] = 0.25f * (src[lo] + 2.0f * src[i] + src[hi]);
        }
      }
    });
  };
  blur_axis(a, b, 0);
  blur_axis(b, a, 1);
  blur_axis(a, b, 2);

  const float gain = static_cast<float>(sigma / kSmoothedStd);
  parallel_for(nz, threads, [&](int iz) {
    std::size_t i = static_cast<std::size_t>(iz) * ny * nx;
    for (int iy = 0; iy < ny; ++iy)
      for (int ix = 0; ix < nx; ++ix, ++i)
        b[i] = std::max(0.05f, 1.0f + gain * b[i]);
  });
  return b;
}

std::array<Vec3, 2> ellipsoid_bbox(const Vec3& center, const Vec3& semi_axes,
                                   const RigidTransform& t) {
  // Support function of the rotated ellipsoid: extent along axis e is
  // |diag(a) R^T e|.
  const auto r = t.rotation.to_rotation_matrix();
  const Vec3 c = apply_point(t, center);
  Vec3 ext;
  for (int axis = 0; axis < 3; ++axis) {
    const Vec3 row{r[axis * 3 + 0], r[axis * 3 + 1], r[axis * 3 + 2]};
    const double e = std::sqrt(std::pow(semi_axes.x * row.x, 2) +
                               std::pow(semi_axes.y * row.y, 2) +
                               std::pow(semi_axes.z * row.z, 2));
    if (axis == 0) ext.x = e;
    if (axis == 1) ext.y = e;
    if (axis == 2) ext.z = e;
  }
  return {c - ext, c + ext};
}

std::pair<Volume3D, GroundTruth> render(const PhantomConfig& cfg, const Scene& scene,
                                        const RigidTransform& scene_to_volume,
                                        std::uint64_t seed, int threads) {
  Volume3D vol(cfg.dims, cfg.spacing, cfg.origin);
  const std::vector<float> speckle =
      speckle_field(cfg.dims, cfg.speckle_sigma, seed, threads);
  const RigidTransform pullback = invert(scene_to_volume);

  const int nx = cfg.dims[0], ny = cfg.dims[1], nz = cfg.dims[2];
  parallel_for(nz, threads, [&](int iz) {
    std::size_t i = static_cast<std::size_t>(iz) * ny * nx;
    for (int iy = 0; iy < ny; ++iy) {
      for (int ix = 0; ix < nx; ++ix, ++i) {
        const Vec3 p = vol.index_to_world({static_cast<double>(ix),
                                           static_cast<double>(iy),
                                           static_cast<double>(iz)});
        const SceneSample s = sample_scene(scene, cfg, apply_point(pullback, p));
        const double v = std::max(s.tissue * speckle[i], s.structure);
        vol.data[i] = static_cast<float>(v);
      }
    }
  });

  GroundTruth truth;
  truth.ellipsoid_center = apply_point(scene_to_volume, scene.center);
  truth.semi_axes = scene.semi_axes;
  truth.bbox = ellipsoid_bbox(scene.center, scene.semi_axes, scene_to_volume);
  for (const Vec3& c : scene.calcifications)
    truth.calcifications.push_back(apply_point(scene_to_volume, c));
  if (scene.needle)
    truth.needle = {{apply_point(scene_to_volume, scene.needle->entry),
                     apply_point(scene_to_volume, scene.needle->tip)}};
  truth.fused_transform = scene_to_volume;
  return {std::move(vol), std::move(truth)};
}

Scene base_scene(const PhantomConfig& cfg) {
  Scene sc;
  Volume3D probe(cfg.dims, cfg.spacing, cfg.origin);
  sc.center = probe.world_center();
  sc.semi_axes = cfg.semi_axes;
  sc.needle = cfg.needle;
  sc.texture_seed = mix64(cfg.seed ^ 0x7ec7ec7e11aa33ULL);

  // Calcification layout: deterministic from the seed, kept interior and
  // mutually separated so each stays individually resolvable.
  SplitMix rng(cfg.seed * 0x2545f4914f6cdd1dULL + 0x9e3779b97f4a7c15ULL);
  int attempts = 0;
  while (static_cast<int>(sc.calcifications.size()) < cfg.n_calcifications &&
         attempts < 10000) {
    ++attempts;
    const Vec3 u{rng.range(-0.6, 0.6), rng.range(-0.6, 0.6), rng.range(-0.6, 0.6)};
    if (u.dot(u) > 0.36) continue;  // inside the 0.6-scaled ellipsoid
    const Vec3 c = sc.center + Vec3{u.x * sc.semi_axes.x, u.y * sc.semi_axes.y,
                                    u.z * sc.semi_axes.z};
    bool ok = true;
    for (const Vec3& prev : sc.calcifications)
      if ((c - prev).norm() < 7.0) ok = false;
    if (!ok) continue;
    sc.calcifications.push_back(c);
    sc.calc_radii.push_back(rng.range(cfg.calc_radius_min_mm, cfg.calc_radius_max_mm));
  }
  if (static_cast<int>(sc.calcifications.size()) < cfg.n_calcifications)
    throw ConfigError("could not place the requested calcifications");
  return sc;
}

}  // namespace

void PhantomConfig::set_gland_volume_cc(double cc) {
  if (!(cc > 0.0)) throw ConfigError("gland volume must be positive");
  const double current =
      4.0 / 3.0 * kPi * semi_axes.x * semi_axes.y * semi_axes.z / 1000.0;
  const double s = std::cbrt(cc / current);
  semi_axes = semi_axes * s;
}

void PhantomConfig::validate() const {
  Volume3D probe(dims, spacing, origin);  // geometry invariants
  if (!(semi_axes.x > 0 && semi_axes.y > 0 && semi_axes.z > 0))
    throw ConfigError("semi-axes must be positive");
  if (!(speckle_sigma >= 0.0 && speckle_sigma < 1.0))
    throw ConfigError("speckle sigma must be in [0, 1)");
  if (n_calcifications < 0) throw ConfigError("n_calcifications must be >= 0");
  if (calc_radius_min_mm > calc_radius_max_mm || calc_radius_min_mm <= 0.0)
    throw ConfigError("invalid calcification radius range");

  const Vec3 c = probe.world_center();
  const Vec3 lo = probe.index_to_world({0, 0, 0});
  const Vec3 hi = probe.index_to_world({static_cast<double>(dims[0] - 1),
                                        static_cast<double>(dims[1] - 1),
                                        static_cast<double>(dims[2] - 1)});
  const double margin = 5.0;
  if (c.x - semi_axes.x < lo.x + margin || c.x + semi_axes.x > hi.x - margin ||
      c.y - semi_axes.y < lo.y + margin || c.y + semi_axes.y > hi.y - margin ||
      c.z - semi_axes.z < lo.z + margin || c.z + semi_axes.z > hi.z - margin)
    throw ConfigError("ellipsoid does not fit in the grid with a 5 mm margin");
}

std::pair<Volume3D, GroundTruth> generate(const PhantomConfig& cfg, int threads) {
  cfg.validate();
  return render(cfg, base_scene(cfg), RigidTransform::identity(), cfg.seed, threads);
}

std::pair<Volume3D, GroundTruth> perturb(const PhantomConfig& cfg,
                                         const GroundTruth& truth,
                                         const RigidTransform& t,
                                         std::uint64_t new_seed, int threads) {
  cfg.validate();
  const RigidTransform total = compose(t, truth.fused_transform);

  Volume3D probe(cfg.dims, cfg.spacing, cfg.origin);
  const Vec3 lo = probe.index_to_world({0, 0, 0});
  const Vec3 hi = probe.index_to_world({static_cast<double>(cfg.dims[0] - 1),
                                        static_cast<double>(cfg.dims[1] - 1),
                                        static_cast<double>(cfg.dims[2] - 1)});

  Scene sc = base_scene(cfg);
  const auto moved_box = ellipsoid_bbox(sc.center, sc.semi_axes, total);
  if (moved_box[0].x < lo.x || moved_box[0].y < lo.y || moved_box[0].z < lo.z ||
      moved_box[1].x > hi.x || moved_box[1].y > hi.y || moved_box[1].z > hi.z)
    throw ConfigError("transform moves the ellipsoid outside the grid");

  return render(cfg, sc, total, new_seed, threads);
}

}  // namespace bxfuse
