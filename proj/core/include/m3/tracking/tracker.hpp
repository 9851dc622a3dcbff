#pragma once

#include <ostream>
#include <vector>

#include "m3/common/grid.hpp"
#include "m3/geom/camera.hpp"
#include "m3/matching/correspondence.hpp"

namespace m3 {

// One term of the frame-to-keyframe reprojection energy: a measured pixel in
// the frame being tracked, the matched 3D point in the other frame's local
// coordinates, the match confidence q, and the motion-mask value at the pixel.
struct TrackedMatch {
  Vec2 pixel = Vec2::Zero();  // measured pixel p
  Vec3 point = Vec3::Zero();  // matched local point X (other frame's coords)
  double q = 1.0;             // match confidence; residual scales by max(q, 0.05)
  double mask = 1.0;          // motion-mask weight; 0 removes the match entirely
};

struct TrackingProblem {
  std::vector<TrackedMatch> matches;
  Intrinsics intr;
  Sim3Pose init;             // initial T mapping point coords -> pixel coords
  double huber_delta = 2.0;  // robust kernel width, pixels
  int max_iters = 50;
  double tol = 1e-8;         // stop when the accepted step's tangent norm drops below
  bool freeze_scale = false; // drop the scale DOF from the solve entirely
  std::ostream* trace = nullptr;  // optional per-iteration `iter,cost,lambda,step_norm`
};

struct TrackingResult {
  Sim3Pose pose;
  double final_cost = 0.0;      // robust cost at the end of the damped solve
  int iterations = 0;           // damped iterations attempted (accepted + rejected)
  double inlier_fraction = 0.0; // fraction of unmasked matches within huber_delta
  bool converged = false;
};

// Scaled reprojection residual r = (p - phi(T * X)) * max(q, 0.05). The
// optional 2x7 Jacobian is with respect to a left tangent increment
// (rho, theta, sigma) of T. The sigma column is identically zero: scaling a
// camera-frame point does not move its central projection, so the energy
// carries an exact one-parameter scale gauge and the solver can never move
// the scale away from its initial value.
// Reports PointBehindCamera when the transformed point has z <= 1e-6.
Vec2 tracking_residual(const Sim3Pose& t, const TrackedMatch& match,
                       const Intrinsics& intr,
                       Eigen::Matrix<double, 2, 7>* jacobian = nullptr);

// Assemble a problem from matcher output: the match's source pixel indexes
// `source_points` (the matched frame's local point map) and its target pixel
// is the measurement, looked up in `motion_mask` when one is given.
TrackingProblem make_tracking_problem(const CorrespondenceSet& matches,
                                      const Grid<Vec3>& source_points,
                                      const Grid<float>* motion_mask,
                                      const Intrinsics& intr,
                                      const Sim3Pose& init);

// Robust pose refinement: iteratively reweighted Gauss-Newton on the Huber
// cost sum_n mask_n * rho_delta(|r_n|), with Levenberg damping (lambda starts
// at 1e-4, x10 on a rejected step, /3 on an accepted one). Matches whose
// transformed point falls behind the camera (z <= 1e-6) drop out of the
// normal equations for that iteration. After the damped solve, matches whose
// residual norm exceeds huber_delta are trimmed and the survivors polished
// with a few undamped Gauss-Newton steps; final_cost reports the pre-polish
// robust cost so the accepted-step monotonicity contract stays visible.
// Errors: InsufficientMatches (< 7 matches with mask > 0), DivergedNaN (any
// non-finite value entering the normal equations).
TrackingResult track(const TrackingProblem& problem);

}  // namespace m3
