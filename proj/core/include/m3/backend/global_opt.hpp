#pragma once

#include <vector>

#include "m3/backend/graph.hpp"

namespace m3 {

struct OptimizeConfig {
  int fixed = 0;            // gauge anchor: this keyframe's pose is frozen
  int max_iters = 30;
  double tol = 1e-8;        // stop when the stacked step norm drops below
  double huber_delta = 2.0; // robust kernel width, pixels
};

struct OptimizeResult {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> cost_trace;  // accepted cost after each iteration
};

// Collective reprojection refinement of every keyframe pose except the
// anchor: for each edge (i, j) and match, the point-side keyframe j's fused
// point is reprojected into i and compared against the measured pixel,
// scaled by max(match confidence, 0.05), weighted by i's motion map, and
// robustified with a Huber kernel. Levenberg-damped Gauss-Newton on the
// stacked translation/rotation tangents; scales stay frozen because the
// reprojection energy is exactly invariant under scaling a relative pose's
// (s, t) jointly — each edge carries a null ray along which scales would
// drift without changing the energy (scale consistency comes from the
// per-batch metric normalization of the incoming point maps instead). The
// reduced system is solved densely below 30 keyframes and with a sparse
// Cholesky above. Matches whose point falls behind the measurement camera
// drop out per-iteration.
// Errors: DisconnectedGraph (some keyframe unreachable from the anchor),
// InsufficientMatches (an edge with < 7 unmasked matches), DivergedNaN.
OptimizeResult optimize_global(KeyframeGraph& graph,
                               const OptimizeConfig& cfg = {});

// The energy optimize_global minimizes, at the graph's current poses.
double global_cost(const KeyframeGraph& graph, double huber_delta = 2.0);

}  // namespace m3
