// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "exogs/error.hpp"

namespace exogs {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Quat = Eigen::Quaterniond;

/// An SE(3) pose stored as unit quaternion + translation in meters.
/// The quaternion is renormalized and canonicalized (w >= 0) by every
/// constructor and operation, so q and -q build equal transforms.
struct RigidTransform {
  Quat rotation{1.0, 0.0, 0.0, 0.0};
  Vec3 translation{0.0, 0.0, 0.0};

  RigidTransform() = default;

  RigidTransform(const Quat& q, const Vec3& t) : rotation(canonicalized(q)), translation(t) {}

  static RigidTransform identity() { return {}; }

  static RigidTransform from_matrix(const Mat4& m) {
    return RigidTransform(Quat(Mat3(m.topLeftCorner<3, 3>())), m.topRightCorner<3, 1>());
  }

  static Quat canonicalized(const Quat& q) {
    Quat out = q.normalized();
    if (out.w() < 0.0) out.coeffs() = -out.coeffs();
    return out;
  }

  Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation_matrix();
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return RigidTransform(a.rotation * b.rotation, a.rotation * b.translation + a.translation);
}

inline RigidTransform invert(const RigidTransform& t) {
  const Quat q_inv = t.rotation.conjugate();
  return RigidTransform(q_inv, -(q_inv * t.translation));
}

/// Rotation angle of `t` in [0, pi].
inline double rotation_angle(const RigidTransform& t) {
  const double w = std::min(1.0, std::abs(t.rotation.w()));
  return 2.0 * std::acos(w);
}

/// Angle between the two rotations, in radians.
inline double rotation_distance(const RigidTransform& a, const RigidTransform& b) {
  return rotation_angle(compose(invert(a), b));
}

inline double translation_distance(const RigidTransform& a, const RigidTransform& b) {
  return (a.translation - b.translation).norm();
}

/// Shortest-arc interpolation: translation linear, rotation slerp with
/// antipodal flip so replays never spin the long way around.
inline RigidTransform pose_interpolate(const RigidTransform& a, const RigidTransform& b, double s) {
  require(s >= 0.0 && s <= 1.0, Errc::OutOfRange, "interpolation fraction must be in [0,1], got " + std::to_string(s));
  Quat qb = b.rotation;
  if (a.rotation.dot(qb) < 0.0) qb.coeffs() = -qb.coeffs();
  return RigidTransform(a.rotation.slerp(s, qb), (1.0 - s) * a.translation + s * b.translation);
}

/// Pinhole camera. Extrinsics map world points into the camera frame;
/// pixel origin is top-left, +x right, +y down, and pixel (i, j) is sampled
/// at continuous coordinate (i, j).
struct CameraModel {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  RigidTransform extrinsics;  // world -> camera

  void validate() const {
    require(fx > 0.0 && fy > 0.0, Errc::SchemaError, "camera focal lengths must be positive");
    require(width >= 1 && height >= 1, Errc::SchemaError, "camera resolution must be at least 1x1");
  }

  /// Camera center in the world frame.
  Vec3 center() const { return invert(extrinsics).translation; }
};

struct PixelDepth {
  Vec2 pixel;
  double depth = 0.0;  // camera-frame z, meters
};

constexpr double kMinCameraDepth = 1e-6;

inline PixelDepth project(const CameraModel& cam, const Vec3& world_point) {
  const Vec3 p = cam.extrinsics.apply(world_point);
  if (p.z() <= kMinCameraDepth) {
    raise(Errc::BehindCamera, "point has camera-frame z = " + std::to_string(p.z()));
  }
  return {Vec2(cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy), p.z()};
}

inline Vec3 unproject(const CameraModel& cam, const Vec2& pixel, double depth) {
  require(depth > 0.0, Errc::OutOfRange, "unproject needs depth > 0");
  const Vec3 p_cam((pixel.x() - cam.cx) / cam.fx * depth, (pixel.y() - cam.cy) / cam.fy * depth, depth);
  return invert(cam.extrinsics).apply(p_cam);
}

}  // namespace exogs
