#pragma once

#include "m3/prior/observation.hpp"

namespace m3 {

struct MotionConfig {
  // Motion value assigned to pixels no keyframe point lands on. The default
  // treats unobserved regions as static (full confidence).
  double uncovered_value = 1.0;
};

struct MotionEstimate {
  Grid<float> motion;     // per-pixel static-confidence in [0, 1]
  Grid<uint8_t> covered;  // 1 where a keyframe point won the splat
};

// Propagates a keyframe's motion map into the current frame. Every valid
// keyframe point is carried through T_rel (keyframe camera -> current camera)
// and z-buffer splatted onto its nearest pixel; a covered current pixel gets
//
//   M_cur = clamp(<D_kf(q), D_cur(p)>, 0, 1) * M_kf(q)
//
// where q is the winning keyframe pixel, so propagated confidence never
// exceeds the warped prior, and descriptor disagreement (a surface that moved
// between the frames) collapses it toward zero. Pixels without a winner, or
// whose current observation is invalid, take uncovered_value and are marked
// uncovered. Throws ShapeMismatch when kf_motion does not match the keyframe.
MotionEstimate estimate_motion_map(const FrameObservation& cur,
                                   const FrameObservation& kf,
                                   const Grid<float>& kf_motion,
                                   const Sim3Pose& t_rel,
                                   const Intrinsics& intr,
                                   const MotionConfig& cfg = {});

}  // namespace m3
