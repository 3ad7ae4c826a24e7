#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "armcast/kinematics.hpp"

namespace armcast {

constexpr int kPoseDim = 16;  // 8 keypoints × (x, y)

/// One frame's pose: 8 keypoints as 16 pixel coordinates ordered
/// x0,y0,...,x7,y7 (base to tool).
struct PoseFrame {
  std::int64_t frame_id = 0;
  std::array<double, kPoseDim> coords{};

  void validate() const {
    for (double c : coords)
      if (!std::isfinite(c)) throw std::invalid_argument("PoseFrame: non-finite coordinate");
  }

  double x(int k) const { return coords[static_cast<std::size_t>(2 * k)]; }
  double y(int k) const { return coords[static_cast<std::size_t>(2 * k + 1)]; }
};

inline PoseFrame project_pose(const std::array<Vec3, kNumKeypoints>& pts3d, const Camera& cam,
                              std::int64_t frame_id) {
  PoseFrame f;
  f.frame_id = frame_id;
  for (int k = 0; k < kNumKeypoints; ++k) {
    const Pixel px = project(pts3d[static_cast<std::size_t>(k)], cam);
    f.coords[static_cast<std::size_t>(2 * k)] = px.u;
    f.coords[static_cast<std::size_t>(2 * k + 1)] = px.v;
  }
  return f;
}

}  // namespace armcast
