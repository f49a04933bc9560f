#pragma once

// The three fusion methods: iconic (automatic, intensity-driven), paired
// homologous points, and iterative closest-point cloud alignment. All
// returned transforms map the fixed/R0 world frame into the moving frame.

#include <utility>
#include <vector>

#include "bxfuse/geometry.hpp"
#include "bxfuse/similarity.hpp"
#include "bxfuse/volume.hpp"

namespace bxfuse {

struct RegistrationConfig {
  SimilarityKind metric = SimilarityKind::ncc();
  int pyramid_levels = 3;        // downsample x2 per level, clamped to >=8 voxels/axis
  int max_iterations = 200;      // simplex iterations per level (per start)
  double tol_translation_mm = 0.05;
  double tol_rotation_deg = 0.05;
  // Minimum acceptable final metric; NaN selects the per-metric default
  // (NCC >= 0.5, NMI >= 1.05, SSD unchecked).
  double success_threshold = std::numeric_limits<double>::quiet_NaN();
  double min_overlap_fraction = 0.25;
  RigidTransform initial_transform;
  bool left_lobe_mode = false;   // compose a 180 deg probe-axis turn into the init
  int threads = 1;

  void validate() const;
};

struct LevelTrace {
  int level = 0;            // 0 = full resolution
  double initial_score = 0; // driving metric at the level's starting transform
  double final_score = 0;
  int iterations = 0;
};

struct RegistrationResult {
  RigidTransform transform;     // fixed/R0 -> moving
  double final_score = 0.0;
  bool converged = false;
  bool succeeded = false;
  double elapsed_seconds = 0.0;
  int iterations = 0;
  double overlap_fraction = 0.0;
  bool small_cloud_warning = false;  // point-cloud path: a cloud had <100 points
  std::vector<LevelTrace> trace;     // iconic path: per pyramid level
};

/// Automatic intensity-driven rigid registration: coarse-to-fine pyramid,
/// derivative-free simplex over 6 parameters (rotation vector in degrees,
/// translation in mm, both relative to the initialization, rotating about
/// the fixed volume's center). Deterministic for fixed inputs and config.
/// Poor-quality data is reported via succeeded=false, never an error.
RegistrationResult register_iconic(const Volume3D& fixed, const Volume3D& moving,
                                   const RegistrationConfig& cfg);

/// Closed-form least-squares rigid fit minimizing sum |moving_i - T(fixed_i)|^2
/// over >=3 non-collinear pairs (quaternion absolute-orientation solution).
RigidTransform register_paired_points(
    const std::vector<std::pair<Vec3, Vec3>>& fixed_moving_pairs);

/// Iterative closest point: nearest-neighbor correspondence then paired-point
/// fit, until the mean correspondence distance change drops below tol.
/// final_score is the mean closest-point distance in mm.
RegistrationResult register_point_clouds(const std::vector<Vec3>& fixed_cloud,
                                         const std::vector<Vec3>& moving_cloud,
                                         const RigidTransform& init,
                                         int max_iters = 50, double tol = 1e-7);

}  // namespace bxfuse
