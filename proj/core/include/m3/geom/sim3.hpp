#pragma once

#include <Eigen/Dense>

#include "m3/common/error.hpp"

namespace m3 {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Cross-product matrix: skew(w) * v == w x v.
Mat3 skew(const Vec3& w);

// SO(3) exponential (Rodrigues), stable for small angles.
Mat3 so3_exp(const Vec3& theta);

// SO(3) logarithm. Reports AngleAtBranchCut when the rotation angle is within
// 1e-6 of pi, where the axis becomes numerically ill-determined.
Vec3 so3_log(const Mat3& R);

// The W matrix coupling translation to (rotation, log-scale) in the Sim(3)
// exponential: t = W(theta, sigma) * rho. Four series branches keep it stable
// when |theta| and/or |sigma| fall below 1e-5.
Mat3 sim3_calc_w(const Vec3& theta, double sigma);

// Similarity transform x -> s * R * x + t.
//
// Tangent vectors are ordered (rho[3], theta[3], sigma) and attach on the
// left: retract(tau, T) = exp(tau) * T.
class Sim3Pose {
 public:
  // Identity.
  Sim3Pose() : s_(1.0), R_(Mat3::Identity()), t_(Vec3::Zero()) {}

  // The rotation block is repaired by polar decomposition whenever
  // ||R^T R - I||_inf exceeds 1e-9, so accumulated round-off in long
  // composition chains cannot push the pose off the manifold.
  Sim3Pose(double s, const Mat3& R, const Vec3& t);

  double scale() const { return s_; }
  const Mat3& rotation() const { return R_; }
  const Vec3& translation() const { return t_; }

  Vec3 apply(const Vec3& x) const { return s_ * (R_ * x) + t_; }

  Sim3Pose operator*(const Sim3Pose& rhs) const;
  Sim3Pose inverse() const;

  static Sim3Pose exp(const Vec7& tau);
  Vec7 log() const;

  Mat4 matrix() const;
  // Extracts (s, R, t) from a 4x4 similarity matrix; s = cbrt(det) of the
  // upper-left block, and the rotation passes through the repairing ctor.
  static Sim3Pose from_matrix(const Mat4& m);

 private:
  double s_;
  Mat3 R_;
  Vec3 t_;
};

// Left retraction used by every iterative solver in the library.
inline Sim3Pose retract(const Vec7& tau, const Sim3Pose& T) {
  return Sim3Pose::exp(tau) * T;
}

}  // namespace m3
