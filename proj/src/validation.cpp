#include "bxfuse/validation.hpp"

#include <algorithm>
#include <cmath>

#include "bxfuse/errors.hpp"

namespace bxfuse {

FiducialErrorStats fiducial_error(const std::vector<FiducialPair>& pairs,
                                  const RigidTransform& t) {
  if (pairs.empty()) throw EmptyInput("fiducial_error needs at least one pair");
  FiducialErrorStats stats;
  stats.per_pair_mm.reserve(pairs.size());
  double sum = 0.0;
  for (const FiducialPair& p : pairs) {
    const double err = (p.point_in_moving - apply_point(t, p.point_in_fixed)).norm();
    stats.per_pair_mm.push_back(err);
    sum += err;
    stats.max_mm = std::max(stats.max_mm, err);
  }
  stats.mean_mm = sum / static_cast<double>(pairs.size());
  return stats;
}

double trajectory_angle(const NeedleTrajectory& a, const NeedleTrajectory& b) {
  const Vec3 da = a.tip - a.entry;
  const Vec3 db = b.tip - b.entry;
  if (da.norm() == 0.0 || db.norm() == 0.0)
    throw DegenerateSegment("trajectory has zero length");
  const double c = std::clamp(da.dot(db) / (da.norm() * db.norm()), -1.0, 1.0);
  return std::acos(c) * kRadToDeg;
}

}  // namespace bxfuse
