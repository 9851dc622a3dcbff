#include "m3/geom/sim3.hpp"

#include <cmath>

namespace m3 {

namespace {
constexpr double kSmall = 1e-5;        // series switch for calc_w branches
constexpr double kOrthoTol = 1e-9;     // rotation repair trigger
constexpr double kBranchMargin = 1e-6; // distance to the pi branch cut
}  // namespace

Mat3 skew(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
      -w.y(), w.x(), 0.0;
  return m;
}

Mat3 so3_exp(const Vec3& theta) {
  const double angle = theta.norm();
  const Mat3 omega = skew(theta);
  double a, b;  // R = I + a*Omega + b*Omega^2
  if (angle < kSmall) {
    const double a2 = angle * angle;
    a = 1.0 - a2 / 6.0;
    b = 0.5 - a2 / 24.0;
  } else {
    a = std::sin(angle) / angle;
    b = (1.0 - std::cos(angle)) / (angle * angle);
  }
  return Mat3::Identity() + a * omega + b * omega * omega;
}

Vec3 so3_log(const Mat3& R) {
  const double cos_angle = std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double angle = std::acos(cos_angle);
  if (angle >= M_PI - kBranchMargin) {
    fail(ErrorCode::AngleAtBranchCut,
         "rotation angle within 1e-6 of pi; axis ill-determined");
  }
  const Vec3 vex(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  if (angle < kSmall) {
    // theta ~ vex/2 * (1 + angle^2/6): second-order-accurate near identity.
    return 0.5 * (1.0 + angle * angle / 6.0) * vex;
  }
  return (angle / (2.0 * std::sin(angle))) * vex;
}

Mat3 sim3_calc_w(const Vec3& theta, double sigma) {
  const double angle = theta.norm();
  const Mat3 omega = skew(theta);
  const double s = std::exp(sigma);
  const double em = std::expm1(sigma);

  // C = (e^sigma - 1)/sigma is exact via expm1 for any sigma; it multiplies
  // the un-damped identity block, so it gets no truncated fallback at all.
  const double C = (sigma == 0.0) ? 1.0 : em / sigma;

  double A, B;
  if (std::abs(sigma) < kSmall) {
    if (angle < kSmall) {
      // Both arguments tiny: Taylor through first order in sigma and
      // second order in angle; remainder < 1e-10 at the 1e-5 switch.
      const double a2 = angle * angle;
      A = 0.5 - a2 / 24.0 + sigma / 3.0;
      B = 1.0 / 6.0 - a2 / 120.0 + sigma / 8.0;
    } else {
      // sigma tiny, finite rotation: zeroth plus first order in sigma.
      // The linear terms matter -- dropping them costs ~3e-7 at the switch.
      const double a2 = angle * angle;
      const double sa = std::sin(angle);
      const double ca = std::cos(angle);
      A = (1.0 - ca) / a2 + sigma * (sa - angle * ca) / (a2 * angle);
      B = (angle - sa) / (a2 * angle) +
          sigma * (0.5 - (ca - 1.0 + angle * sa) / a2) / a2;
    }
  } else if (angle < kSmall) {
    // angle tiny, finite sigma: sigma*s - expm1(sigma) keeps the numerator
    // cancellation-free down to the switch point.
    const double s2 = sigma * sigma;
    A = (sigma * s - em) / s2;
    B = ((em - sigma) + 0.5 * s2 + em * sigma * (0.5 * sigma - 1.0)) /
        (s2 * sigma);
  } else {
    const double a = s * std::sin(angle);
    const double b = s * std::cos(angle);
    const double c = angle * angle + sigma * sigma;
    A = (a * sigma + (1.0 - b) * angle) / (angle * c);
    B = (C - ((b - 1.0) * sigma + a * angle) / c) / (angle * angle);
  }
  return A * omega + B * omega * omega + C * Mat3::Identity();
}

Sim3Pose::Sim3Pose(double s, const Mat3& R, const Vec3& t)
    : s_(s), R_(R), t_(t) {
  const Mat3 gram = R_.transpose() * R_;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > kOrthoTol) {
    // Polar decomposition: the orthogonal factor nearest to R in Frobenius
    // norm, with the determinant forced positive.
    Eigen::JacobiSVD<Mat3> svd(R_, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 u = svd.matrixU();
    const Mat3 v = svd.matrixV();
    if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
    R_ = u * v.transpose();
  }
}

Sim3Pose Sim3Pose::operator*(const Sim3Pose& rhs) const {
  return Sim3Pose(s_ * rhs.s_, R_ * rhs.R_, s_ * (R_ * rhs.t_) + t_);
}

Sim3Pose Sim3Pose::inverse() const {
  const double inv_s = 1.0 / s_;
  const Mat3 Rt = R_.transpose();
  return Sim3Pose(inv_s, Rt, -inv_s * (Rt * t_));
}

Sim3Pose Sim3Pose::exp(const Vec7& tau) {
  const Vec3 rho = tau.head<3>();
  const Vec3 theta = tau.segment<3>(3);
  const double sigma = tau(6);
  return Sim3Pose(std::exp(sigma), so3_exp(theta),
                  sim3_calc_w(theta, sigma) * rho);
}

Vec7 Sim3Pose::log() const {
  const Vec3 theta = so3_log(R_);
  const double sigma = std::log(s_);
  const Mat3 w = sim3_calc_w(theta, sigma);
  Vec7 tau;
  tau.head<3>() = w.partialPivLu().solve(t_);
  tau.segment<3>(3) = theta;
  tau(6) = sigma;
  return tau;
}

Mat4 Sim3Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = s_ * R_;
  m.topRightCorner<3, 1>() = t_;
  return m;
}

Sim3Pose Sim3Pose::from_matrix(const Mat4& m) {
  const Mat3 sr = m.topLeftCorner<3, 3>();
  const double s = std::cbrt(sr.determinant());
  return Sim3Pose(s, sr / s, m.topRightCorner<3, 1>());
}

}  // namespace m3
