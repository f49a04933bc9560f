#include "bxfuse/registration.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "bxfuse/errors.hpp"

namespace bxfuse {

namespace {

constexpr double kPenaltyScore = -1e9;
constexpr int kMinOverlapVoxels = 32;

// ---------------------------------------------------------------------------
// Nelder-Mead over 6 parameters: rotation vector (deg) and translation (mm),
// both deltas from the initialization, rotation taken about the fixed
// volume's world center so the two blocks stay commensurate (1 deg ~ 1 mm at
// prostate scale).
// ---------------------------------------------------------------------------

using Params = std::array<double, 6>;

RigidTransform params_to_transform(const Params& p, const RigidTransform& init,
                                   const Vec3& center) {
  const RigidTransform delta =
      about_center(Quat::from_rotation_vector(Vec3{p[0], p[1], p[2]} * kDegToRad),
                   center, Vec3{p[3], p[4], p[5]});
  return compose(init, delta);
}

struct Evaluation {
  double score = kPenaltyScore;   // maximized by the optimizer
  double metric_value = 0.0;      // driving metric in its natural orientation
  double overlap = 0.0;
};

struct ScoreContext {
  const Volume3D* fixed;
  const Volume3D* moving;
  const RegistrationConfig* cfg;
  const RigidTransform* init;
  Vec3 center;
};

Evaluation evaluate_params(const ScoreContext& ctx, const Params& p) {
  const RigidTransform t = params_to_transform(p, *ctx.init, ctx.center);
  Evaluation ev;
  try {
    if (ctx.cfg->metric.type == SimilarityKind::Type::nmi) {
      const ResampleResult r = resample(*ctx.moving, t, *ctx.fixed, ctx.cfg->threads);
      std::size_t valid = 0;
      for (const auto v : r.mask) valid += v;
      ev.overlap = static_cast<double>(valid) / ctx.fixed->voxel_count();
      if (valid < kMinOverlapVoxels) return ev;
      ev.metric_value = nmi(*ctx.fixed, r.volume, r.mask, ctx.cfg->metric.bins,
                            ctx.cfg->threads);
      ev.score = ev.metric_value;
    } else {
      const kernels::Moments m =
          transformed_moments(*ctx.fixed, *ctx.moving, t, ctx.cfg->threads);
      ev.overlap = m.n / static_cast<double>(ctx.fixed->voxel_count());
      if (m.n < kMinOverlapVoxels) return ev;
      if (ctx.cfg->metric.type == SimilarityKind::Type::ssd) {
        ev.metric_value = mean_ssd_from_moments(m);
        ev.score = -ev.metric_value;
      } else {
        ev.metric_value = ncc_from_moments(m);
        ev.score = ev.metric_value;
      }
    }
  } catch (const DegenerateImage&) {
    // Constant overlap region: no usable signal at this pose.
    ev.score = kPenaltyScore;
  }
  return ev;
}

struct Vertex {
  Params p;
  Evaluation ev;
};

struct SimplexResult {
  Vertex best;
  int iterations = 0;
  bool converged = false;
};

bool within_tolerance(const std::array<Vertex, 7>& simplex, double tol_rot,
                      double tol_tr) {
  for (int v = 1; v < 7; ++v) {
    for (int i = 0; i < 3; ++i)
      if (std::abs(simplex[v].p[i] - simplex[0].p[i]) > tol_rot) return false;
    for (int i = 3; i < 6; ++i)
      if (std::abs(simplex[v].p[i] - simplex[0].p[i]) > tol_tr) return false;
  }
  return true;
}

/// One simplex run maximizing ev.score; start vertex is kept, so the result
/// never regresses below the starting evaluation.
SimplexResult nelder_mead(const ScoreContext& ctx, const Vertex& start,
                          double step_rot, double step_tr, int max_iter,
                          double tol_rot, double tol_tr) {
  std::array<Vertex, 7> s;
  s[0] = start;
  for (int i = 0; i < 6; ++i) {
    Params p = start.p;
    p[i] += (i < 3) ? step_rot : step_tr;
    s[i + 1] = Vertex{p, evaluate_params(ctx, p)};
  }

  auto order = [&] {
    std::stable_sort(s.begin(), s.end(), [](const Vertex& a, const Vertex& b) {
      return a.ev.score > b.ev.score;
    });
  };
  order();

  SimplexResult out;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    if (within_tolerance(s, tol_rot, tol_tr)) {
      out.converged = true;
      break;
    }
    Params centroid{};
    for (int v = 0; v < 6; ++v)
      for (int i = 0; i < 6; ++i) centroid[i] += s[v].p[i] / 6.0;

    auto walk = [&](double coeff) {
      Params p;
      for (int i = 0; i < 6; ++i)
        p[i] = centroid[i] + coeff * (centroid[i] - s[6].p[i]);
      return Vertex{p, evaluate_params(ctx, p)};
    };

    const Vertex reflected = walk(1.0);
    if (reflected.ev.score > s[0].ev.score) {
      const Vertex expanded = walk(2.0);
      s[6] = (expanded.ev.score > reflected.ev.score) ? expanded : reflected;
    } else if (reflected.ev.score > s[5].ev.score) {
      s[6] = reflected;
    } else {
      const Vertex contracted = walk(reflected.ev.score > s[6].ev.score ? 0.5 : -0.5);
      if (contracted.ev.score > std::max(reflected.ev.score, s[6].ev.score)) {
        s[6] = contracted;
      } else {
        // Shrink toward the best vertex.
        for (int v = 1; v < 7; ++v) {
          Params p;
          for (int i = 0; i < 6; ++i) p[i] = s[0].p[i] + 0.5 * (s[v].p[i] - s[0].p[i]);
          s[v] = Vertex{p, evaluate_params(ctx, p)};
        }
      }
    }
    order();
  }
  out.best = s[0];
  out.iterations = iter;
  return out;
}

int clamp_pyramid_levels(const Volume3D& a, const Volume3D& b, int requested) {
  int levels = 1;
  int min_dim = std::min({a.dims[0], a.dims[1], a.dims[2], b.dims[0], b.dims[1],
                          b.dims[2]});
  while (levels < requested && (min_dim >> 1) >= 8) {
    min_dim >>= 1;
    ++levels;
  }
  return levels;
}

double default_success_threshold(const SimilarityKind& kind) {
  switch (kind.type) {
    case SimilarityKind::Type::ncc: return 0.5;
    case SimilarityKind::Type::nmi: return 1.05;
    case SimilarityKind::Type::ssd: return std::numeric_limits<double>::quiet_NaN();
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

void RegistrationConfig::validate() const {
  metric.validate();
  if (pyramid_levels < 1 || pyramid_levels > 6)
    throw ConfigError("pyramid_levels must be in [1, 6]");
  if (max_iterations < 10) throw ConfigError("max_iterations must be >= 10");
  if (!(tol_translation_mm > 0.0) || !(tol_rotation_deg > 0.0))
    throw ConfigError("parameter tolerances must be positive");
  if (min_overlap_fraction < 0.0 || min_overlap_fraction > 1.0)
    throw ConfigError("min_overlap_fraction must be in [0, 1]");
}

RegistrationResult register_iconic(const Volume3D& fixed, const Volume3D& moving,
                                   const RegistrationConfig& cfg) {
  cfg.validate();
  fixed.validate_geometry();
  moving.validate_geometry();
  const auto t0 = std::chrono::steady_clock::now();

  RigidTransform init = cfg.initial_transform;
  const Vec3 center = fixed.world_center();
  if (cfg.left_lobe_mode) {
    // The contralateral lobe is acquired with the probe turned half a turn
    // about its axis (z); seed the search on that side of the basin.
    const Quat z180 = Quat::from_rotation_vector({0.0, 0.0, kPi});
    init = compose(cfg.initial_transform, about_center(z180, center));
  }

  const int levels = clamp_pyramid_levels(fixed, moving, cfg.pyramid_levels);
  std::vector<Volume3D> fixed_pyr{fixed};
  std::vector<Volume3D> moving_pyr{moving};
  for (int l = 1; l < levels; ++l) {
    fixed_pyr.push_back(downsample2x(fixed_pyr.back()));
    moving_pyr.push_back(downsample2x(moving_pyr.back()));
  }

  RegistrationResult result;
  Params params{};
  bool first_level = true;

  for (int level = levels - 1; level >= 0; --level) {
    ScoreContext ctx{&fixed_pyr[level], &moving_pyr[level], &cfg, &init, center};
    Vertex start{params, evaluate_params(ctx, params)};
    if (first_level) {
      if (start.ev.overlap <= 0.0)
        throw EmptyOverlap("initial transform leaves no common support");
      first_level = false;
    }

    const double step_scale = static_cast<double>(1 << level) /
                              static_cast<double>(1 << (levels - 1));
    const double step_rot = 4.0 * step_scale;
    const double step_tr = 4.0 * step_scale;

    SimplexResult run = nelder_mead(ctx, start, step_rot, step_tr,
                                    cfg.max_iterations, cfg.tol_rotation_deg,
                                    cfg.tol_translation_mm);
    // One restart from the best point with a tighter simplex.
    SimplexResult rerun = nelder_mead(ctx, run.best, 0.25 * step_rot,
                                      0.25 * step_tr, cfg.max_iterations,
                                      cfg.tol_rotation_deg, cfg.tol_translation_mm);
    params = rerun.best.p;
    result.iterations += run.iterations + rerun.iterations;
    result.converged = rerun.converged;
    result.trace.push_back(LevelTrace{level, start.ev.metric_value,
                                      rerun.best.ev.metric_value,
                                      run.iterations + rerun.iterations});
    if (level == 0) {
      result.final_score = rerun.best.ev.metric_value;
      result.overlap_fraction = rerun.best.ev.overlap;
    }
  }

  result.transform = params_to_transform(params, init, center);

  double threshold = cfg.success_threshold;
  if (std::isnan(threshold)) threshold = default_success_threshold(cfg.metric);
  bool metric_ok = true;
  if (!std::isnan(threshold)) {
    metric_ok = (cfg.metric.type == SimilarityKind::Type::ssd)
                    ? result.final_score <= threshold
                    : result.final_score >= threshold;
  }
  result.succeeded = result.converged && metric_ok &&
                     result.overlap_fraction >= cfg.min_overlap_fraction;

  result.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// ---------------------------------------------------------------------------
// Paired homologous points: quaternion absolute-orientation solution.
// ---------------------------------------------------------------------------

RigidTransform register_paired_points(
    const std::vector<std::pair<Vec3, Vec3>>& pairs) {
  const std::size_t n = pairs.size();
  if (n < 3)
    throw DegenerateConfiguration("need at least 3 point pairs, got " +
                                  std::to_string(n));

  Eigen::Vector3d cf = Eigen::Vector3d::Zero();
  Eigen::Vector3d cm = Eigen::Vector3d::Zero();
  for (const auto& [f, m] : pairs) {
    cf += Eigen::Vector3d(f.x, f.y, f.z);
    cm += Eigen::Vector3d(m.x, m.y, m.z);
  }
  cf /= static_cast<double>(n);
  cm /= static_cast<double>(n);

  Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();   // sum f' m'^T
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero(); // sum f' f'^T
  for (const auto& [f, m] : pairs) {
    const Eigen::Vector3d fc = Eigen::Vector3d(f.x, f.y, f.z) - cf;
    const Eigen::Vector3d mc = Eigen::Vector3d(m.x, m.y, m.z) - cm;
    cross += fc * mc.transpose();
    scatter += fc * fc.transpose();
  }

  // Collinear (or coincident) fixed points leave a rotation about the line
  // unobservable.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> scatter_eig(scatter);
  const auto& sev = scatter_eig.eigenvalues();  // ascending
  if (sev(1) <= 1e-12 * std::max(sev(2), 1e-30))
    throw DegenerateConfiguration("fixed points are collinear or coincident");

  const double sxx = cross(0, 0), sxy = cross(0, 1), sxz = cross(0, 2);
  const double syx = cross(1, 0), syy = cross(1, 1), syz = cross(1, 2);
  const double szx = cross(2, 0), szy = cross(2, 1), szz = cross(2, 2);

  Eigen::Matrix4d n_mat;
  n_mat << sxx + syy + szz, syz - szy,       szx - sxz,        sxy - syx,
           syz - szy,       sxx - syy - szz, sxy + syx,        szx + sxz,
           szx - sxz,       sxy + syx,       -sxx + syy - szz, syz + szy,
           sxy - syx,       szx + sxz,       syz + szy,        -sxx - syy + szz;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(n_mat);
  const Eigen::Vector4d q = eig.eigenvectors().col(3);  // largest eigenvalue

  RigidTransform out;
  out.rotation = Quat(q(0), q(1), q(2), q(3));
  const Vec3 rotated_cf = out.rotation.rotate({cf(0), cf(1), cf(2)});
  out.translation = Vec3{cm(0), cm(1), cm(2)} - rotated_cf;
  return out;
}

// ---------------------------------------------------------------------------
// Iterative closest point.
// ---------------------------------------------------------------------------

RegistrationResult register_point_clouds(const std::vector<Vec3>& fixed_cloud,
                                         const std::vector<Vec3>& moving_cloud,
                                         const RigidTransform& init,
                                         int max_iters, double tol) {
  if (fixed_cloud.empty() || moving_cloud.empty())
    throw EmptyInput("point clouds must be nonempty");
  const auto t0 = std::chrono::steady_clock::now();

  RegistrationResult result;
  result.small_cloud_warning =
      fixed_cloud.size() < 100 || moving_cloud.size() < 100;

  auto nearest = [&](const Vec3& p) {
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::max();
    for (std::size_t i = 0; i < moving_cloud.size(); ++i) {
      const Vec3 d = moving_cloud[i] - p;
      const double d2 = d.dot(d);
      if (d2 < best_d2) {
        best_d2 = d2;
        best = i;
      }
    }
    return best;
  };

  RigidTransform t = init;
  double prev_score = std::numeric_limits<double>::max();
  for (int iter = 0; iter < max_iters; ++iter) {
    std::vector<std::pair<Vec3, Vec3>> pairs;
    pairs.reserve(fixed_cloud.size());
    double sum_d = 0.0;
    for (const Vec3& f : fixed_cloud) {
      const Vec3 mapped = apply_point(t, f);
      const Vec3& m = moving_cloud[nearest(mapped)];
      pairs.emplace_back(f, m);
      sum_d += (m - mapped).norm();
    }
    const double score = sum_d / static_cast<double>(fixed_cloud.size());
    result.iterations = iter + 1;
    result.final_score = score;
    if (std::abs(prev_score - score) < tol) {
      result.converged = true;
      break;
    }
    prev_score = score;
    t = register_paired_points(pairs);
  }

  result.transform = t;
  result.succeeded = result.converged;
  result.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace bxfuse
