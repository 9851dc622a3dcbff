#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "m3/geom/sim3.hpp"

namespace m3 {

struct TimedPose {
  double timestamp = 0.0;
  Sim3Pose pose;
};

using Trajectory = std::vector<TimedPose>;

// Text trajectory interchange, one pose per line:
//   timestamp tx ty tz qx qy qz qw
// with a Hamilton quaternion written w-last and canonicalized to qw >= 0.
// Scale is folded into t; a pose whose scale differs from 1 is preceded by a
// sidecar comment line "# scale=<s>" that applies to the next pose line only.
void write_tum(std::ostream& out, const Trajectory& traj);
void write_tum_file(const std::string& path, const Trajectory& traj);

Trajectory read_tum(std::istream& in);
Trajectory read_tum_file(const std::string& path);

// Single-line forms used by the CLI.
std::string format_tum_line(const TimedPose& tp);
TimedPose parse_tum_line(const std::string& line);

}  // namespace m3
