#pragma once

#include "m3/matching/correspondence.hpp"

namespace m3 {

struct MatchConfig {
  int radius = 4;               // search window reach (L-inf), 0 = single pixel
  double min_similarity = 0.5;  // matches below this are dropped
};

// Projective guided matching: each valid source pixel's point is mapped into
// the target camera through T_rel = T_tgt^-1 * T_src and projected; the
// target descriptor maximizing the dot product inside the (2r+1)^2 window
// around the rounded projection wins. Exact similarity ties prefer the
// candidate closest to the unrounded projection, then the smaller (row,
// column). Sources that land behind the target camera, project outside the
// image by more than r, or peak below min_similarity are dropped silently and
// tallied in the returned statistics.
CorrespondenceSet coarse_to_fine_match(const FrameObservation& src,
                                       const FrameObservation& tgt,
                                       const Sim3Pose& pose_src,
                                       const Sim3Pose& pose_tgt,
                                       const Intrinsics& intr,
                                       const MatchConfig& cfg = {});

// Ground-truth channel of a frame, used for mining supervision pairs.
struct GroundTruthView {
  const FrameObservation* obs = nullptr;  // descriptors, validity, Q
  const Grid<Vec3>* local = nullptr;      // exact camera-frame points
  Sim3Pose pose;                          // exact camera-to-world
};

// Mines coincidence correspondences from the ground-truth channel: a
// reference pixel matches the other frame's pixel whose exact point, mapped
// into the reference camera frame, lies within eps of the reference pixel's
// exact point. Distance ties prefer the smaller (row, column) pixel in the
// other frame. Similarity and weight are filled from the observations so the
// usual correspondence invariants hold. Throws MissingGroundTruth when a
// view lacks its ground-truth channel.
CorrespondenceSet mine_gt_correspondences(const GroundTruthView& ref,
                                          const GroundTruthView& other,
                                          double eps);

}  // namespace m3
