#include "bxfuse/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "bxfuse/errors.hpp"

namespace bxfuse {

Vec3 Vec3::normalized() const {
  const double n = norm();
  if (n == 0.0) throw DegenerateSegment("cannot normalize zero vector");
  return *this / n;
}

Quat::Quat(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {
  const double n = norm();
  if (n == 0.0) throw Error("zero quaternion");
  w /= n; x /= n; y /= n; z /= n;
}

Quat Quat::operator*(const Quat& o) const {
  return Quat(w * o.w - x * o.x - y * o.y - z * o.z,
              w * o.x + x * o.w + y * o.z - z * o.y,
              w * o.y - x * o.z + y * o.w + z * o.x,
              w * o.z + x * o.y - y * o.x + z * o.w);
}

Vec3 Quat::rotate(const Vec3& v) const {
  // q v q* expanded to two cross products.
  const Vec3 u{x, y, z};
  const Vec3 t = u.cross(v) * 2.0;
  return v + t * w + u.cross(t);
}

Quat Quat::from_rotation_vector(const Vec3& axis_angle_rad) {
  const double angle = axis_angle_rad.norm();
  if (angle < 1e-300) return Quat{};
  const double half = 0.5 * angle;
  const double s = std::sin(half) / angle;
  return Quat(std::cos(half), axis_angle_rad.x * s, axis_angle_rad.y * s,
              axis_angle_rad.z * s);
}

Vec3 Quat::to_rotation_vector() const {
  // Keep the representative with angle in [0, pi].
  double qw = w;
  Vec3 u{x, y, z};
  if (qw < 0.0) { qw = -qw; u = -u; }
  const double sn = u.norm();
  if (sn < 1e-15) return Vec3{};
  const double angle = 2.0 * std::atan2(sn, qw);
  return u * (angle / sn);
}

std::array<double, 9> Quat::to_rotation_matrix() const {
  const double xx = x * x, yy = y * y, zz = z * z;
  const double xy = x * y, xz = x * z, yz = y * z;
  const double wx = w * x, wy = w * y, wz = w * z;
  return {1 - 2 * (yy + zz), 2 * (xy - wz),     2 * (xz + wy),
          2 * (xy + wz),     1 - 2 * (xx + zz), 2 * (yz - wx),
          2 * (xz - wy),     2 * (yz + wx),     1 - 2 * (xx + yy)};
}

Quat Quat::from_rotation_matrix(const std::array<double, 9>& r) {
  // Shepperd's method: pick the largest diagonal combination for stability.
  const double trace = r[0] + r[4] + r[8];
  double w, x, y, z;
  if (trace > 0.0) {
    const double s = std::sqrt(trace + 1.0) * 2.0;
    w = 0.25 * s;
    x = (r[7] - r[5]) / s;
    y = (r[2] - r[6]) / s;
    z = (r[3] - r[1]) / s;
  } else if (r[0] > r[4] && r[0] > r[8]) {
    const double s = std::sqrt(1.0 + r[0] - r[4] - r[8]) * 2.0;
    w = (r[7] - r[5]) / s;
    x = 0.25 * s;
    y = (r[1] + r[3]) / s;
    z = (r[2] + r[6]) / s;
  } else if (r[4] > r[8]) {
    const double s = std::sqrt(1.0 + r[4] - r[0] - r[8]) * 2.0;
    w = (r[2] - r[6]) / s;
    x = (r[1] + r[3]) / s;
    y = 0.25 * s;
    z = (r[5] + r[7]) / s;
  } else {
    const double s = std::sqrt(1.0 + r[8] - r[0] - r[4]) * 2.0;
    w = (r[3] - r[1]) / s;
    x = (r[2] + r[6]) / s;
    y = (r[5] + r[7]) / s;
    z = 0.25 * s;
  }
  return Quat(w, x, y, z);
}

Matrix4 Matrix4::operator*(const Matrix4& o) const {
  Matrix4 out;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += at(r, k) * o.at(k, c);
      out.at(r, c) = s;
    }
  }
  return out;
}

Vec3 Matrix4::apply(const Vec3& p) const {
  return {at(0, 0) * p.x + at(0, 1) * p.y + at(0, 2) * p.z + at(0, 3),
          at(1, 0) * p.x + at(1, 1) * p.y + at(1, 2) * p.z + at(1, 3),
          at(2, 0) * p.x + at(2, 1) * p.y + at(2, 2) * p.z + at(2, 3)};
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation = a.rotation * b.rotation;  // renormalized by Quat ctor
  out.translation = a.rotation.rotate(b.translation) + a.translation;
  return out;
}

RigidTransform invert(const RigidTransform& t) {
  RigidTransform out;
  out.rotation = t.rotation.conjugate();
  out.translation = -out.rotation.rotate(t.translation);
  return out;
}

Vec3 apply_point(const RigidTransform& t, const Vec3& p) {
  return t.rotation.rotate(p) + t.translation;
}

RigidTransform from_euler(double rx_deg, double ry_deg, double rz_deg,
                          double tx_mm, double ty_mm, double tz_mm) {
  const Quat qx = Quat::from_rotation_vector({rx_deg * kDegToRad, 0, 0});
  const Quat qy = Quat::from_rotation_vector({0, ry_deg * kDegToRad, 0});
  const Quat qz = Quat::from_rotation_vector({0, 0, rz_deg * kDegToRad});
  RigidTransform out;
  out.rotation = qz * qy * qx;
  out.translation = {tx_mm, ty_mm, tz_mm};
  return out;
}

RigidTransform from_rotation_vector_deg(const Vec3& rot_deg, const Vec3& t_mm) {
  RigidTransform out;
  out.rotation = Quat::from_rotation_vector(rot_deg * kDegToRad);
  out.translation = t_mm;
  return out;
}

RigidTransform about_center(const Quat& rotation, const Vec3& center,
                            const Vec3& translation) {
  // p -> R(p - c) + c + t  ==  R p + (c + t - R c)
  RigidTransform out;
  out.rotation = rotation;
  out.translation = center + translation - rotation.rotate(center);
  return out;
}

Matrix4 to_matrix(const RigidTransform& t) {
  const auto r = t.rotation.to_rotation_matrix();
  Matrix4 out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out.at(i, j) = r[i * 3 + j];
  out.at(0, 3) = t.translation.x;
  out.at(1, 3) = t.translation.y;
  out.at(2, 3) = t.translation.z;
  return out;
}

RigidTransform decompose(const Matrix4& m, double tol) {
  std::array<double, 9> r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r[i * 3 + j] = m.at(i, j);

  // Orthonormality and determinant checks before trusting the block.
  for (int i = 0; i < 3; ++i) {
    for (int j = i; j < 3; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += r[i * 3 + k] * r[j * 3 + k];
      const double expect = (i == j) ? 1.0 : 0.0;
      if (std::abs(dot - expect) > tol)
        throw Error("matrix upper-left 3x3 block is not orthonormal");
    }
  }
  const double det = r[0] * (r[4] * r[8] - r[5] * r[7]) -
                     r[1] * (r[3] * r[8] - r[5] * r[6]) +
                     r[2] * (r[3] * r[7] - r[4] * r[6]);
  if (std::abs(det - 1.0) > tol)
    throw Error("matrix rotation block has determinant != +1");

  for (int c = 0; c < 3; ++c) {
    if (std::abs(m.at(3, c)) > tol) throw Error("matrix last row is not (0,0,0,1)");
  }
  if (std::abs(m.at(3, 3) - 1.0) > tol) throw Error("matrix last row is not (0,0,0,1)");

  RigidTransform out;
  out.rotation = Quat::from_rotation_matrix(r);
  out.translation = {m.at(0, 3), m.at(1, 3), m.at(2, 3)};
  return out;
}

}  // namespace bxfuse
