#pragma once

#include "m3/geom/sim3.hpp"

namespace m3 {

// Pinhole intrinsics; pixel coordinates have (0, 0) at the center of the
// top-left pixel, u along columns, v along rows.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

// Perspective projection of a camera-frame point. Reports BehindCamera when
// z <= 1e-9.
Vec2 project(const Intrinsics& K, const Vec3& x_cam);

// Inverse: pixel + depth -> camera-frame point. Reports NonPositiveDepth when
// z <= 0.
Vec3 backproject(const Intrinsics& K, const Vec2& uv, double z);

// Jacobian of project() w.r.t. the camera-frame point (2x3). Same validity
// domain as project().
Eigen::Matrix<double, 2, 3> project_jacobian(const Intrinsics& K,
                                             const Vec3& x_cam);

}  // namespace m3
