#pragma once

// Fusion-accuracy metrics: fiducial (calcification) distance error and
// duplicated-trajectory angular error.

#include <string>
#include <vector>

#include "bxfuse/biopsy_map.hpp"
#include "bxfuse/geometry.hpp"

namespace bxfuse {

struct FiducialPair {
  Vec3 point_in_fixed;   // mm, R0 frame
  Vec3 point_in_moving;  // mm, moving volume frame
  std::string id;
};

struct FiducialErrorStats {
  double mean_mm = 0.0;
  double max_mm = 0.0;
  std::vector<double> per_pair_mm;
};

/// Residual |point_in_moving - t(point_in_fixed)| per pair, with t the
/// fixed -> moving fused transform; mean and max over pairs.
FiducialErrorStats fiducial_error(const std::vector<FiducialPair>& pairs,
                                  const RigidTransform& t);

/// Oriented angle between entry->tip directions, degrees in [0, 180].
/// A 180 deg flip is a real error, not an equivalence.
double trajectory_angle(const NeedleTrajectory& a, const NeedleTrajectory& b);

}  // namespace bxfuse
