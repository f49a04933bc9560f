#pragma once

// Rigid 6-DOF transform algebra: quaternion + translation, with 4x4
// homogeneous matrix conversions. World frame is right-handed,
// x = patient left->right, y = posterior->anterior, z = apex->base, in mm.

#include <array>
#include <cmath>

namespace bxfuse {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDegToRad = kPi / 180.0;
constexpr double kRadToDeg = 180.0 / kPi;

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  constexpr Vec3() = default;
  constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }

  constexpr double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  constexpr Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const;

  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

/// Unit quaternion; normalized after every constructing operation.
struct Quat {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  constexpr Quat() = default;
  Quat(double w_, double x_, double y_, double z_);

  Quat conjugate() const { return Quat(w, -x, -y, -z); }
  Quat operator*(const Quat& o) const;
  Vec3 rotate(const Vec3& v) const;
  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

  /// Rotation by |axis_angle| radians about axis_angle's direction.
  static Quat from_rotation_vector(const Vec3& axis_angle_rad);
  /// Rotation vector (axis * angle, radians), angle in [0, pi].
  Vec3 to_rotation_vector() const;
  /// Row-major 3x3 rotation matrix.
  std::array<double, 9> to_rotation_matrix() const;
  static Quat from_rotation_matrix(const std::array<double, 9>& r);
};

/// Row-major homogeneous 4x4 transform; last row fixed at (0,0,0,1).
struct Matrix4 {
  std::array<double, 16> m{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};

  double& at(int r, int c) { return m[r * 4 + c]; }
  double at(int r, int c) const { return m[r * 4 + c]; }
  Matrix4 operator*(const Matrix4& o) const;
  Vec3 apply(const Vec3& p) const;
  static Matrix4 identity() { return Matrix4{}; }
};

/// 6-DOF rigid transform: p -> rotation * p + translation (mm).
struct RigidTransform {
  Quat rotation;
  Vec3 translation;

  static RigidTransform identity() { return RigidTransform{}; }
};

/// a then applied after b: apply(compose(a,b), p) == apply(a, apply(b, p)).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& t);
Vec3 apply_point(const RigidTransform& t, const Vec3& p);

/// Intrinsic Z-Y-X Euler angles in degrees (rotation R = Rz * Ry * Rx),
/// translation in mm.
RigidTransform from_euler(double rx_deg, double ry_deg, double rz_deg,
                          double tx_mm, double ty_mm, double tz_mm);

/// Rotation vector in degrees (axis * angle) plus translation in mm.
RigidTransform from_rotation_vector_deg(const Vec3& rot_deg, const Vec3& t_mm);

/// Rigid rotation about an arbitrary center point: p -> R(p - c) + c + t.
RigidTransform about_center(const Quat& rotation, const Vec3& center,
                            const Vec3& translation = Vec3{});

Matrix4 to_matrix(const RigidTransform& t);

/// Recover a RigidTransform from a homogeneous matrix. Throws bxfuse::Error
/// if the upper-left 3x3 block is not a rotation within `tol`.
RigidTransform decompose(const Matrix4& m, double tol = 1e-4);

}  // namespace bxfuse
