#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace armcast {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    const double n = norm();
    if (n == 0.0) throw std::invalid_argument("Vec3::normalized: zero vector");
    return {x / n, y / n, z / n};
  }
};

struct Mat3 {
  // Row-major 3x3.
  std::array<double, 9> m = {1, 0, 0, 0, 1, 0, 0, 0, 1};

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += m[i * 3 + k] * o.m[k * 3 + j];
        r.m[i * 3 + j] = s;
      }
    return r;
  }

  /// Rodrigues rotation about a unit axis.
  static Mat3 axis_angle(const Vec3& axis, double angle) {
    const Vec3 a = axis.normalized();
    const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
    Mat3 r;
    r.m = {t * a.x * a.x + c,       t * a.x * a.y - s * a.z, t * a.x * a.z + s * a.y,
           t * a.x * a.y + s * a.z, t * a.y * a.y + c,       t * a.y * a.z - s * a.x,
           t * a.x * a.z - s * a.y, t * a.y * a.z + s * a.x, t * a.z * a.z + c};
    return r;
  }
};

/// Rigid transform p ↦ R p + t.
struct RigidTransform {
  Mat3 rotation;
  Vec3 translation;

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

constexpr int kNumLinks = 7;
constexpr int kNumKeypoints = 8;  // base + 7 joint/tool positions

/// Serial kinematic chain: 7 links, each extending along local +x, each
/// preceded by a revolute joint about its axis.
struct ArmModel {
  std::array<double, kNumLinks> link_lengths{};
  std::array<Vec3, kNumLinks> joint_axes{};
  RigidTransform base_pose;

  void validate() const {
    for (double l : link_lengths)
      if (!(l > 0.0)) throw std::invalid_argument("ArmModel: link lengths must be > 0");
    for (const Vec3& a : joint_axes)
      if (std::abs(a.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("ArmModel: joint axes must be unit vectors");
  }
};

/// Desk-scale default arm, roughly tabletop-manipulator proportions, with
/// alternating twist/bend joint axes.
inline ArmModel default_arm() {
  ArmModel arm;
  arm.link_lengths = {0.12, 0.22, 0.20, 0.12, 0.10, 0.08, 0.06};
  arm.joint_axes = {Vec3{0, 0, 1}, Vec3{0, 1, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1},
                    Vec3{0, 1, 0}, Vec3{0, 0, 1}, Vec3{0, 1, 0}};
  return arm;
}

/// Keypoint 0 is the base origin; keypoint k advances from keypoint k−1 by
/// link k rotated through the cumulative joint rotations 1..k.
inline std::array<Vec3, kNumKeypoints> forward_kinematics(const ArmModel& arm,
                                                          const std::array<double, kNumLinks>& angles) {
  for (double a : angles)
    if (!std::isfinite(a)) throw std::invalid_argument("forward_kinematics: non-finite angle");

  std::array<Vec3, kNumKeypoints> pts;
  Vec3 p{0, 0, 0};
  Mat3 cum;
  pts[0] = arm.base_pose.apply(p);
  for (int k = 0; k < kNumLinks; ++k) {
    cum = cum * Mat3::axis_angle(arm.joint_axes[static_cast<std::size_t>(k)],
                                 angles[static_cast<std::size_t>(k)]);
    const Vec3 link = cum * Vec3{arm.link_lengths[static_cast<std::size_t>(k)], 0, 0};
    p = p + link;
    pts[static_cast<std::size_t>(k + 1)] = arm.base_pose.apply(p);
  }
  return pts;
}

/// Pinhole camera. Extrinsic maps world points into the camera frame
/// (z forward, positive depth).
struct Camera {
  double focal = 100.0;  // pixels
  double cx = 48.0, cy = 48.0;
  int width = 96, height = 96;
  RigidTransform extrinsic;

  void validate() const {
    if (!(focal > 0.0)) throw std::invalid_argument("Camera: focal must be > 0");
    if (cx < 0 || cx >= width || cy < 0 || cy >= height)
      throw std::invalid_argument("Camera: principal point outside image");
  }
};

struct Pixel {
  double u = 0.0, v = 0.0;
};

inline Pixel project(const Vec3& world, const Camera& cam) {
  const Vec3 p = cam.extrinsic.apply(world);
  if (!(p.z > 0.0)) throw std::domain_error("project: point not in front of camera");
  return {cam.cx + cam.focal * p.x / p.z, cam.cy + cam.focal * p.y / p.z};
}

/// Camera placed to view the default arm's workspace head-on, with focal
/// length chosen so the reachable sphere fits inside the frame.
inline Camera default_camera(int render_size) {
  Camera cam;
  cam.width = render_size;
  cam.height = render_size;
  cam.cx = render_size / 2.0;
  cam.cy = render_size / 2.0;
  const double reach = 0.9;     // default arm max reach, meters
  const double distance = 2.2;  // camera standoff, meters
  cam.extrinsic.rotation = Mat3::axis_angle(Vec3{1, 0, 0}, -std::numbers::pi / 2.0);
  cam.extrinsic.translation = Vec3{0, 0.25, distance};
  cam.focal = 0.44 * render_size * (distance - reach) / reach;
  return cam;
}

}  // namespace armcast
