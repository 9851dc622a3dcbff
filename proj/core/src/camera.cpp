#include "m3/geom/camera.hpp"

namespace m3 {

namespace {
constexpr double kMinProjectDepth = 1e-9;
}

Vec2 project(const Intrinsics& K, const Vec3& x_cam) {
  if (x_cam.z() <= kMinProjectDepth) {
    fail(ErrorCode::BehindCamera, "projection of point with z <= 1e-9");
  }
  const double inv_z = 1.0 / x_cam.z();
  return Vec2(K.fx * x_cam.x() * inv_z + K.cx,
              K.fy * x_cam.y() * inv_z + K.cy);
}

Vec3 backproject(const Intrinsics& K, const Vec2& uv, double z) {
  if (z <= 0.0) {
    fail(ErrorCode::NonPositiveDepth, "backprojection with z <= 0");
  }
  return Vec3((uv.x() - K.cx) / K.fx * z, (uv.y() - K.cy) / K.fy * z, z);
}

Eigen::Matrix<double, 2, 3> project_jacobian(const Intrinsics& K,
                                             const Vec3& x_cam) {
  if (x_cam.z() <= kMinProjectDepth) {
    fail(ErrorCode::BehindCamera, "projection jacobian with z <= 1e-9");
  }
  const double inv_z = 1.0 / x_cam.z();
  const double inv_z2 = inv_z * inv_z;
  Eigen::Matrix<double, 2, 3> j;
  j << K.fx * inv_z, 0.0, -K.fx * x_cam.x() * inv_z2,
       0.0, K.fy * inv_z, -K.fy * x_cam.y() * inv_z2;
  return j;
}

}  // namespace m3
