#pragma once

#include "m3/prior/observation.hpp"

namespace m3 {

// Recovers the pinhole intrinsics a batch's point maps were expressed under.
// The principal point is fixed at the image center ((W-1)/2, (H-1)/2); each
// focal length is estimated per pixel from the pinhole relation
// fx = z*(u - cx)/x (and the y analogue), made robust by RANSAC over
// single-pixel hypotheses with a 1 px reprojection inlier gate, then refined
// as the median estimate over the inlier set.
//
// Estimates are invariant to a global rescaling of the point maps (both z and
// the lateral coordinate scale). Throws DegenerateGeometry when the batch has
// fewer than 100 valid pixels or when less than half of them carry a usable
// lateral signal (|x| > 1e-6 * z).
Intrinsics estimate_intrinsics_ransac(const InferenceBatch& batch);

// Rewrites every valid point onto the reference camera's pixel rays: X
// becomes backproject(k_ref, (u,v), X.z). Depths are preserved bitwise, so
// the operation is idempotent, and afterwards project(k_ref, X) reproduces
// the pixel center to machine precision. Runs the RANSAC estimate first (its
// failure modes propagate) and returns it so callers can log the detected
// intrinsics. Poses and all other channels are untouched.
Intrinsics align_intrinsics(InferenceBatch& batch, const Intrinsics& k_ref);

}  // namespace m3
