#include "m3/geom/trajectory.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace m3 {

namespace {

constexpr double kUnitScaleTol = 1e-12;

Sim3Pose pose_from_parts(double s, double qx, double qy, double qz, double qw,
                         const Vec3& t) {
  Eigen::Quaterniond q(qw, qx, qy, qz);
  q.normalize();
  return Sim3Pose(s, q.toRotationMatrix(), t);
}

}  // namespace

std::string format_tum_line(const TimedPose& tp) {
  Eigen::Quaterniond q(tp.pose.rotation());
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  const Vec3& t = tp.pose.translation();
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%.6f %.12f %.12f %.12f %.12f %.12f %.12f %.12f",
                tp.timestamp, t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w());
  return std::string(buf);
}

void write_tum(std::ostream& out, const Trajectory& traj) {
  char buf[64];
  for (const TimedPose& tp : traj) {
    if (std::abs(tp.pose.scale() - 1.0) > kUnitScaleTol) {
      std::snprintf(buf, sizeof(buf), "# scale=%.17g", tp.pose.scale());
      out << buf << '\n';
    }
    out << format_tum_line(tp) << '\n';
  }
}

void write_tum_file(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot open " + path + " for writing");
  write_tum(out, traj);
}

TimedPose parse_tum_line(const std::string& line) {
  std::istringstream iss(line);
  double ts, tx, ty, tz, qx, qy, qz, qw;
  if (!(iss >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
    fail(ErrorCode::IoError, "malformed trajectory line: " + line);
  }
  return TimedPose{ts, pose_from_parts(1.0, qx, qy, qz, qw, Vec3(tx, ty, tz))};
}

Trajectory read_tum(std::istream& in) {
  Trajectory traj;
  std::string line;
  double pending_scale = 1.0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("scale=");
      if (pos != std::string::npos) {
        pending_scale = std::stod(line.substr(pos + 6));
      }
      continue;
    }
    TimedPose tp = parse_tum_line(line);
    if (std::abs(pending_scale - 1.0) > kUnitScaleTol) {
      tp.pose = Sim3Pose(pending_scale, tp.pose.rotation(),
                         tp.pose.translation());
    }
    pending_scale = 1.0;
    traj.push_back(tp);
  }
  return traj;
}

Trajectory read_tum_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  return read_tum(in);
}

}  // namespace m3
