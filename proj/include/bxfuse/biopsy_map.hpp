#pragma once

// Needle trajectories mapped into R0, the 12-cell planned-target grid inside
// the prostate bounding box, and the per-target coverage statistics.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "bxfuse/geometry.hpp"

namespace bxfuse {

enum class Side { left, right };
enum class TargetColumn { lateral, parasagittal };
enum class TargetLevel { base, mid, apex };

struct TargetLabel {
  Side side = Side::left;
  TargetColumn column = TargetColumn::lateral;
  TargetLevel level = TargetLevel::base;

  bool operator==(const TargetLabel&) const = default;
  std::string name() const;                       // e.g. "left-lateral-base"
  static TargetLabel parse(const std::string& s);
};

/// One of the 6 side-merged report rows (base/mid/apex x lateral/parasagittal).
enum class TargetGroup { BL, BP, ML, MP, AL, AP };
TargetGroup group_of(const TargetLabel& label);
const char* group_name(TargetGroup g);

struct Box3 {
  Vec3 min, max;
  bool contains(const Vec3& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y &&
           p.z >= min.z && p.z <= max.z;
  }
  Vec3 extent() const { return max - min; }
};

/// The prostate bounding box split into 4 equal x-columns (left-lateral,
/// left-parasagittal, right-parasagittal, right-lateral with x increasing)
/// and 3 equal z-levels (apex, mid, base with z increasing); y unsplit.
class TargetGrid {
 public:
  explicit TargetGrid(const Box3& bbox);

  const Box3& bbox() const { return bbox_; }
  const Box3& cell(const TargetLabel& label) const;
  const std::array<std::pair<TargetLabel, Box3>, 12>& cells() const { return cells_; }
  /// Label of the cell containing p, or nullopt outside the bbox.
  std::optional<TargetLabel> locate(const Vec3& p) const;

 private:
  Box3 bbox_;
  std::array<std::pair<TargetLabel, Box3>, 12> cells_;
};

struct NeedleTrajectory {
  Vec3 entry;             // mm
  Vec3 tip;               // mm
  double core_length_mm = 0.0;  // sampled tissue length, ending at the tip
  std::string volume_id;
  TargetLabel planned_target;

  void validate() const;  // |tip - entry| >= core_length > 0
};

/// Map a trajectory through t (the volume -> R0 transform for its volume).
NeedleTrajectory map_trajectory(const NeedleTrajectory& traj, const RigidTransform& t);

/// Length of segment [a, b] inside an axis-aligned box (slab clipping).
double segment_box_length(const Vec3& a, const Vec3& b, const Box3& box);

/// Length of the biopsy core inside a cell: only the distal core_length mm
/// of the needle (ending at the tip) counts as sampled material.
double segment_cell_length(const Vec3& entry, const Vec3& tip,
                           double core_length_mm, const Box3& cell);

/// One biopsy ready for scoring; a missing transform marks a failed fusion.
struct BiopsyRecord {
  NeedleTrajectory trajectory;                   // in its own volume frame
  std::optional<RigidTransform> volume_to_r0;    // nullopt => excluded
};

struct TargetRowStats {
  int n_toward = 0;              // biopsies planned at this target
  int n_inside = 0;              // of those, with core length > 0 in the cell
  double pct_inside = 0.0;       // 100 * n_inside / n_toward
  double mean_len_inside_mm = 0.0;  // mean core length in cell, inside-biopsies
  double pct_len_inside = 0.0;      // mean of 100 * len / core, inside-biopsies
};

struct MetricsReport {
  std::array<TargetRowStats, 6> rows;  // indexed by TargetGroup
  TargetRowStats total;
  int included = 0;
  int excluded = 0;  // biopsies without a successful registration
};

/// Score a session against the planned-target grid. Biopsies lacking a
/// transform are excluded and counted, mirroring the clinical fusion
/// failures; everything else is mapped into R0 and measured.
MetricsReport evaluate_session(const std::vector<BiopsyRecord>& biopsies,
                               const TargetGrid& grid);

/// CSV per the report schema: target,n_toward,n_inside,pct_inside,
/// mean_len_inside_mm,pct_len_inside with rows BL..AP and TOTAL;
/// percentages and lengths rounded to integers.
std::string report_to_csv(const MetricsReport& report);

}  // namespace bxfuse
