#include "m3/matching/motion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "m3/common/error.hpp"

namespace m3 {

MotionEstimate estimate_motion_map(const FrameObservation& cur,
                                   const FrameObservation& kf,
                                   const Grid<float>& kf_motion,
                                   const Sim3Pose& t_rel,
                                   const Intrinsics& intr,
                                   const MotionConfig& cfg) {
  if (!kf_motion.same_shape(kf.valid)) {
    fail(ErrorCode::ShapeMismatch, "motion map: prior shape mismatch");
  }
  if (cur.desc_dim != kf.desc_dim) {
    fail(ErrorCode::DimensionMismatch, "motion map: descriptor dims differ");
  }
  const int w = cur.width(), h = cur.height();

  Grid<double> zbuf(w, h, std::numeric_limits<double>::infinity());
  Grid<int32_t> win_u(w, h, -1), win_v(w, h, -1);
  for (int v = 0; v < kf.height(); ++v) {
    for (int u = 0; u < kf.width(); ++u) {
      if (!kf.valid.at(u, v)) continue;
      const Vec3 y = t_rel.apply(kf.X.at(u, v));
      if (y.z() <= 1e-9) continue;
      const Vec2 px = project(intr, y);
      const int cu = static_cast<int>(std::lround(px.x()));
      const int cv = static_cast<int>(std::lround(px.y()));
      if (cu < 0 || cu >= w || cv < 0 || cv >= h) continue;
      if (y.z() < zbuf.at(cu, cv)) {
        zbuf.at(cu, cv) = y.z();
        win_u.at(cu, cv) = u;
        win_v.at(cu, cv) = v;
      }
    }
  }

  MotionEstimate out;
  out.motion = Grid<float>(w, h, static_cast<float>(cfg.uncovered_value));
  out.covered = Grid<uint8_t>(w, h, 0);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (win_u.at(u, v) < 0 || !cur.valid.at(u, v)) continue;
      const int qu = win_u.at(u, v), qv = win_v.at(u, v);
      double sim = 0.0;
      const float* a = kf.desc(qu, qv);
      const float* b = cur.desc(u, v);
      for (int c = 0; c < cur.desc_dim; ++c) sim += double(a[c]) * b[c];
      const double m = std::clamp(sim, 0.0, 1.0) * kf_motion.at(qu, qv);
      out.motion.at(u, v) = static_cast<float>(m);
      out.covered.at(u, v) = 1;
    }
  }
  return out;
}

}  // namespace m3
