#include "bxfuse/biopsy_map.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bxfuse/errors.hpp"

namespace bxfuse {

std::string TargetLabel::name() const {
  std::string s = (side == Side::left) ? "left" : "right";
  s += (column == TargetColumn::lateral) ? "-lateral" : "-parasagittal";
  switch (level) {
    case TargetLevel::base: s += "-base"; break;
    case TargetLevel::mid: s += "-mid"; break;
    case TargetLevel::apex: s += "-apex"; break;
  }
  return s;
}

TargetLabel TargetLabel::parse(const std::string& s) {
  TargetLabel label;
  std::stringstream ss(s);
  std::string part;
  std::array<std::string, 3> parts;
  int i = 0;
  while (std::getline(ss, part, '-') && i < 3) parts[i++] = part;
  if (i != 3) throw ConfigError("bad target label: " + s);
  if (parts[0] == "left") label.side = Side::left;
  else if (parts[0] == "right") label.side = Side::right;
  else throw ConfigError("bad target side: " + parts[0]);
  if (parts[1] == "lateral") label.column = TargetColumn::lateral;
  else if (parts[1] == "parasagittal") label.column = TargetColumn::parasagittal;
  else throw ConfigError("bad target column: " + parts[1]);
  if (parts[2] == "base") label.level = TargetLevel::base;
  else if (parts[2] == "mid") label.level = TargetLevel::mid;
  else if (parts[2] == "apex") label.level = TargetLevel::apex;
  else throw ConfigError("bad target level: " + parts[2]);
  return label;
}

TargetGroup group_of(const TargetLabel& label) {
  const int level_idx = (label.level == TargetLevel::base) ? 0
                        : (label.level == TargetLevel::mid) ? 1 : 2;
  const int col_idx = (label.column == TargetColumn::lateral) ? 0 : 1;
  return static_cast<TargetGroup>(level_idx * 2 + col_idx);
}

const char* group_name(TargetGroup g) {
  switch (g) {
    case TargetGroup::BL: return "BL";
    case TargetGroup::BP: return "BP";
    case TargetGroup::ML: return "ML";
    case TargetGroup::MP: return "MP";
    case TargetGroup::AL: return "AL";
    case TargetGroup::AP: return "AP";
  }
  return "?";
}

TargetGrid::TargetGrid(const Box3& bbox) : bbox_(bbox) {
  const Vec3 ext = bbox.extent();
  if (!(ext.x > 0.0 && ext.y > 0.0 && ext.z > 0.0))
    throw DegenerateBox("target grid bbox must have positive extent");

  // x columns in grid order; the world x axis runs patient left -> right.
  const std::array<std::pair<Side, TargetColumn>, 4> columns{{
      {Side::left, TargetColumn::lateral},
      {Side::left, TargetColumn::parasagittal},
      {Side::right, TargetColumn::parasagittal},
      {Side::right, TargetColumn::lateral},
  }};
  // z levels in grid order; world z runs apex -> base.
  const std::array<TargetLevel, 3> levels{TargetLevel::apex, TargetLevel::mid,
                                          TargetLevel::base};

  int idx = 0;
  for (int zi = 0; zi < 3; ++zi) {
    for (int xi = 0; xi < 4; ++xi) {
      Box3 cell;
      cell.min = {bbox.min.x + ext.x * xi / 4.0, bbox.min.y,
                  bbox.min.z + ext.z * zi / 3.0};
      cell.max = {bbox.min.x + ext.x * (xi + 1) / 4.0, bbox.max.y,
                  bbox.min.z + ext.z * (zi + 1) / 3.0};
      cells_[idx++] = {TargetLabel{columns[xi].first, columns[xi].second,
                                   levels[zi]},
                       cell};
    }
  }
}

const Box3& TargetGrid::cell(const TargetLabel& label) const {
  for (const auto& [l, box] : cells_)
    if (l == label) return box;
  throw ConfigError("unknown target label");  // unreachable: 12 labels cover all
}

std::optional<TargetLabel> TargetGrid::locate(const Vec3& p) const {
  if (!bbox_.contains(p)) return std::nullopt;
  const Vec3 ext = bbox_.extent();
  const int xi = std::min(3, static_cast<int>((p.x - bbox_.min.x) / ext.x * 4.0));
  const int zi = std::min(2, static_cast<int>((p.z - bbox_.min.z) / ext.z * 3.0));
  return cells_[zi * 4 + xi].first;
}

void NeedleTrajectory::validate() const {
  const double len = (tip - entry).norm();
  if (!(core_length_mm > 0.0))
    throw DegenerateSegment("core length must be positive");
  if (len + 1e-9 < core_length_mm)
    throw DegenerateSegment("needle shorter than its core length");
}

NeedleTrajectory map_trajectory(const NeedleTrajectory& traj, const RigidTransform& t) {
  NeedleTrajectory out = traj;
  out.entry = apply_point(t, traj.entry);
  out.tip = apply_point(t, traj.tip);
  return out;  // core_length unchanged: rigid maps preserve length
}

double segment_box_length(const Vec3& a, const Vec3& b, const Box3& box) {
  const Vec3 d = b - a;
  double t0 = 0.0, t1 = 1.0;
  for (int axis = 0; axis < 3; ++axis) {
    const double da = d[axis];
    const double pa = a[axis];
    const double lo = axis == 0 ? box.min.x : (axis == 1 ? box.min.y : box.min.z);
    const double hi = axis == 0 ? box.max.x : (axis == 1 ? box.max.y : box.max.z);
    if (std::abs(da) < 1e-300) {
      if (pa < lo || pa > hi) return 0.0;
      continue;
    }
    double tn = (lo - pa) / da;
    double tf = (hi - pa) / da;
    if (tn > tf) std::swap(tn, tf);
    t0 = std::max(t0, tn);
    t1 = std::min(t1, tf);
    if (t0 > t1) return 0.0;
  }
  return (t1 - t0) * d.norm();
}

double segment_cell_length(const Vec3& entry, const Vec3& tip,
                           double core_length_mm, const Box3& cell) {
  const Vec3 d = tip - entry;
  const double len = d.norm();
  if (len <= 0.0) throw DegenerateSegment("entry and tip coincide");
  const double core = std::min(core_length_mm, len);
  const Vec3 core_start = tip - d * (core / len);
  return segment_box_length(core_start, tip, cell);
}

MetricsReport evaluate_session(const std::vector<BiopsyRecord>& biopsies,
                               const TargetGrid& grid) {
  MetricsReport report;
  std::array<double, 6> sum_len{}, sum_ratio{};
  double total_len = 0.0, total_ratio = 0.0;

  for (const BiopsyRecord& b : biopsies) {
    if (!b.volume_to_r0) {
      ++report.excluded;
      continue;
    }
    ++report.included;
    const NeedleTrajectory in_r0 = map_trajectory(b.trajectory, *b.volume_to_r0);
    const int g = static_cast<int>(group_of(in_r0.planned_target));
    TargetRowStats& row = report.rows[g];
    ++row.n_toward;
    ++report.total.n_toward;

    const Box3& cell = grid.cell(in_r0.planned_target);
    const double len =
        segment_cell_length(in_r0.entry, in_r0.tip, in_r0.core_length_mm, cell);
    if (len > 0.0) {
      ++row.n_inside;
      ++report.total.n_inside;
      sum_len[g] += len;
      sum_ratio[g] += len / in_r0.core_length_mm;
      total_len += len;
      total_ratio += len / in_r0.core_length_mm;
    }
  }

  for (int g = 0; g < 6; ++g) {
    TargetRowStats& row = report.rows[g];
    if (row.n_toward > 0) row.pct_inside = 100.0 * row.n_inside / row.n_toward;
    if (row.n_inside > 0) {
      row.mean_len_inside_mm = sum_len[g] / row.n_inside;
      row.pct_len_inside = 100.0 * sum_ratio[g] / row.n_inside;
    }
  }
  if (report.total.n_toward > 0)
    report.total.pct_inside = 100.0 * report.total.n_inside / report.total.n_toward;
  if (report.total.n_inside > 0) {
    report.total.mean_len_inside_mm = total_len / report.total.n_inside;
    report.total.pct_len_inside = 100.0 * total_ratio / report.total.n_inside;
  }
  return report;
}

std::string report_to_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "target,n_toward,n_inside,pct_inside,mean_len_inside_mm,pct_len_inside\n";
  auto emit = [&](const char* name, const TargetRowStats& row) {
    out << name << ',' << row.n_toward << ',' << row.n_inside << ','
        << std::lround(row.pct_inside) << ',' << std::lround(row.mean_len_inside_mm)
        << ',' << std::lround(row.pct_len_inside) << '\n';
  };
  for (int g = 0; g < 6; ++g)
    emit(group_name(static_cast<TargetGroup>(g)), report.rows[g]);
  emit("TOTAL", report.total);
  return out.str();
}

}  // namespace bxfuse
