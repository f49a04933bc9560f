#pragma once

// Small JSON (de)serialization helpers shared by the session layer and CLI.

#include <array>

#include <json.hpp>

#include "bxfuse/biopsy_map.hpp"
#include "bxfuse/errors.hpp"
#include "bxfuse/geometry.hpp"
#include "bxfuse/validation.hpp"

namespace bxfuse {

inline nlohmann::json vec3_to_json(const Vec3& v) {
  return nlohmann::json::array({v.x, v.y, v.z});
}

inline Vec3 vec3_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3)
    throw ConfigError("expected a 3-element array: " + j.dump());
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

/// Transforms travel in files as 16 row-major numbers (the Matrix4 form).
inline nlohmann::json transform_to_json(const RigidTransform& t) {
  nlohmann::json out = nlohmann::json::array();
  for (const double x : to_matrix(t).m) out.push_back(x);
  return out;
}

inline RigidTransform transform_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 16)
    throw ConfigError("expected a 16-element transform array");
  Matrix4 m;
  for (int i = 0; i < 16; ++i) m.m[i] = j[i].get<double>();
  return decompose(m);
}

inline nlohmann::json trajectory_to_json(const NeedleTrajectory& t) {
  return nlohmann::json{{"entry", vec3_to_json(t.entry)},
                        {"tip", vec3_to_json(t.tip)},
                        {"core_length_mm", t.core_length_mm},
                        {"planned_target", t.planned_target.name()}};
}

inline NeedleTrajectory trajectory_from_json(const nlohmann::json& j,
                                             const std::string& volume_id = "") {
  NeedleTrajectory t;
  t.entry = vec3_from_json(j.at("entry"));
  t.tip = vec3_from_json(j.at("tip"));
  t.core_length_mm = j.value("core_length_mm", 1.0);
  if (j.contains("planned_target"))
    t.planned_target = TargetLabel::parse(j.at("planned_target").get<std::string>());
  t.volume_id = volume_id;
  return t;
}

inline nlohmann::json fiducial_to_json(const FiducialPair& p) {
  return nlohmann::json{{"id", p.id},
                        {"fixed", vec3_to_json(p.point_in_fixed)},
                        {"moving", vec3_to_json(p.point_in_moving)}};
}

inline FiducialPair fiducial_from_json(const nlohmann::json& j) {
  FiducialPair p;
  p.id = j.value("id", "");
  p.point_in_fixed = vec3_from_json(j.at("fixed"));
  p.point_in_moving = vec3_from_json(j.at("moving"));
  return p;
}

inline nlohmann::json box_to_json(const Box3& b) {
  return nlohmann::json::array({b.min.x, b.max.x, b.min.y, b.max.y, b.min.z, b.max.z});
}

inline Box3 box_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 6)
    throw ConfigError("expected bbox as [x0,x1,y0,y1,z0,z1]");
  Box3 b;
  b.min = {j[0].get<double>(), j[2].get<double>(), j[4].get<double>()};
  b.max = {j[1].get<double>(), j[3].get<double>(), j[5].get<double>()};
  return b;
}

}  // namespace bxfuse
