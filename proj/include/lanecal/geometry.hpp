#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <utility>

#include "lanecal/errors.hpp"

namespace lanecal {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Pinhole intrinsics with zero skew. fx and fy may differ.
struct CameraIntrinsics {
  double fx{1.0};
  double fy{1.0};
  double cx{0.0};
  double cy{0.0};

  CameraIntrinsics() = default;
  CameraIntrinsics(double fx_, double fy_, double cx_, double cy_)
      : fx(fx_), fy(fy_), cx(cx_), cy(cy_) {
    if (!(fx > 0.0) || !(fy > 0.0))
      fail(ErrorCode::ConfigError, "focal lengths must be positive");
  }

  Mat3 matrix() const {
    Mat3 k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }

  Mat3 inverse() const {
    Mat3 ki;
    ki << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
    return ki;
  }

  /// Ray through pixel p, i.e. K^-1 [p, 1].
  Vec3 back_project(const Vec2& p) const {
    return {(p.x() - cx) / fx, (p.y() - cy) / fy, 1.0};
  }

  /// Dehomogenized image point of a camera ray (ray.z must be nonzero).
  Vec2 project(const Vec3& ray) const {
    return {fx * ray.x() / ray.z() + cx, fy * ray.y() / ray.z() + cy};
  }
};

/// Observed piece of a lane boundary in the image plane.
struct LineSegment {
  Vec2 p1{0.0, 0.0};
  Vec2 p2{0.0, 0.0};
  std::optional<int> boundary_id{};

  LineSegment() = default;
  LineSegment(const Vec2& a, const Vec2& b, std::optional<int> id = std::nullopt)
      : p1(a), p2(b), boundary_id(id) {
    if ((p2 - p1).norm() <= 1e-9)
      fail(ErrorCode::DegenerateSegment, "endpoints coincide");
  }

  double length() const { return (p2 - p1).norm(); }
  Vec2 midpoint() const { return 0.5 * (p1 + p2); }
  Vec2 direction() const { return (p2 - p1).normalized(); }
};

/// Unit-norm 3-vector. Construct via of(); the invariant is kept by normalization.
struct UnitVector3 {
  Vec3 v{0.0, 0.0, 1.0};

  static UnitVector3 of(const Vec3& raw) {
    const double n = raw.norm();
    if (n < 1e-12) fail(ErrorCode::ConfigError, "cannot normalize near-zero vector");
    UnitVector3 u;
    u.v = raw / n;
    return u;
  }

  /// Sign-canonical representative: z >= 0, ties broken on y then x.
  UnitVector3 canonical() const {
    UnitVector3 u = *this;
    if (u.v.z() < 0.0 || (u.v.z() == 0.0 && (u.v.y() < 0.0 || (u.v.y() == 0.0 && u.v.x() < 0.0))))
      u.v = -u.v;
    return u;
  }

  double x() const { return v.x(); }
  double y() const { return v.y(); }
  double z() const { return v.z(); }
};

/// Proper rotation. Built only from products of elementary rotations.
struct Rotation3 {
  Mat3 m{Mat3::Identity()};

  Vec3 operator*(const Vec3& p) const { return m * p; }
  Rotation3 transposed() const { return Rotation3{m.transpose()}; }
};

/// Rotation about the camera x-axis (pitch) times rotation about y (yaw),
/// mapping the driving direction [0,0,1] in road coordinates into the camera frame.
inline Rotation3 rotation_pitch_yaw(double theta, double phi) {
  const double ct = std::cos(theta), st = std::sin(theta);
  const double cp = std::cos(phi), sp = std::sin(phi);
  Mat3 rx, ry;
  rx << 1, 0, 0, 0, ct, -st, 0, st, ct;
  ry << cp, 0, sp, 0, 1, 0, -sp, 0, cp;
  return Rotation3{rx * ry};
}

/// In-plane roll factor used by the BEV mapping: [[c, s, 0], [-s, c, 0], [0, 0, 1]].
inline Rotation3 roll_matrix(double psi) {
  const double c = std::cos(psi), s = std::sin(psi);
  Mat3 rz;
  rz << c, s, 0, -s, c, 0, 0, 0, 1;
  return Rotation3{rz};
}

/// Great-circle normal of a segment: unit cross product of the back-projected endpoints.
inline UnitVector3 ngc_of_segment(const CameraIntrinsics& k, const LineSegment& seg) {
  const Vec3 r1 = k.back_project(seg.p1);
  const Vec3 r2 = k.back_project(seg.p2);
  const Vec3 n = r1.cross(r2);
  if (n.norm() < 1e-12)
    fail(ErrorCode::DegenerateSegment, "endpoints back-project to parallel rays");
  return UnitVector3::of(n);
}

/// Pitch and yaw of the camera relative to a vanishing direction.
/// Exact inverse of rotation_pitch_yaw applied to [0,0,1]:
///   v = (sin phi, -sin theta cos phi, cos theta cos phi).
inline std::pair<double, double> pitch_yaw_from_vd(const UnitVector3& v) {
  if (std::abs(v.z()) < 1e-9)
    fail(ErrorCode::DegenerateVd, "vanishing direction perpendicular to optical axis");
  const double theta = std::atan2(-v.y(), v.z());
  const double phi = std::atan2(v.x(), std::hypot(v.y(), v.z()));
  return {theta, phi};
}

/// Back-projected vanishing direction of an image-plane vanishing point, z >= 0.
inline UnitVector3 vd_from_vp(const CameraIntrinsics& k, const Vec2& vp) {
  UnitVector3 v = UnitVector3::of(k.back_project(vp));
  if (v.z() < 0.0) v.v = -v.v;
  return v;
}

}  // namespace lanecal
