#include "m3/tracking/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace m3 {

namespace {

constexpr double kConfidenceFloor = 0.05;
constexpr double kMinDepth = 1e-6;
constexpr double kLambdaInit = 1e-4;
constexpr int kPolishIters = 10;

// Huber cost with the quadratic branch e^2 / 2.
double huber_cost(double e, double delta) {
  return e <= delta ? 0.5 * e * e : delta * (e - 0.5 * delta);
}

// d(huber)/de divided by e: the IRLS weight.
double huber_weight(double e, double delta) {
  return e <= delta ? 1.0 : delta / e;
}

struct NormalEquations {
  Eigen::Matrix<double, 7, 7> h = Eigen::Matrix<double, 7, 7>::Zero();
  Vec7 g = Vec7::Zero();
  double cost = 0.0;
  int in_front = 0;
};

// One pass over the surviving matches at pose T. `robust` switches the Huber
// reweighting on (damped phase) or off (inlier polish).
NormalEquations accumulate(const std::vector<TrackedMatch>& matches,
                           const Sim3Pose& t, const Intrinsics& intr,
                           double delta, bool robust) {
  NormalEquations eq;
  Eigen::Matrix<double, 2, 7> jac;
  for (const TrackedMatch& m : matches) {
    const Vec3 y = t.apply(m.point);
    if (!(y.z() > kMinDepth)) continue;  // dropped this iteration
    ++eq.in_front;
    const double sq = std::max(m.q, kConfidenceFloor);
    const Vec2 r = (m.pixel - project(intr, y)) * sq;
    jac.leftCols<3>() = -sq * project_jacobian(intr, y);
    jac.middleCols<3>(3) = jac.leftCols<3>() * -skew(y);
    jac.col(6).setZero();  // exact scale gauge of central projection
    const double e = r.norm();
    const double w = m.mask * (robust ? huber_weight(e, delta) : 1.0);
    eq.cost += m.mask * (robust ? huber_cost(e, delta) : 0.5 * e * e);
    eq.h.noalias() += w * jac.transpose() * jac;
    eq.g.noalias() += w * jac.transpose() * r;
  }
  return eq;
}

// Robust cost only (for evaluating a trial step).
double robust_cost_at(const std::vector<TrackedMatch>& matches,
                      const Sim3Pose& t, const Intrinsics& intr,
                      double delta) {
  double cost = 0.0;
  for (const TrackedMatch& m : matches) {
    const Vec3 y = t.apply(m.point);
    if (!(y.z() > kMinDepth)) continue;
    const double sq = std::max(m.q, kConfidenceFloor);
    cost += m.mask * huber_cost(((m.pixel - project(intr, y)) * sq).norm(), delta);
  }
  return cost;
}

// Solve the damped system. The scale column is identically zero, so with
// freeze_scale the dimension drops to 6; otherwise the damping alone
// determines tau_sigma = 0 because its gradient entry is exactly zero.
Vec7 solve_step(const NormalEquations& eq, double lambda, bool freeze_scale) {
  Vec7 tau = Vec7::Zero();
  if (freeze_scale) {
    Eigen::Matrix<double, 6, 6> a = eq.h.topLeftCorner<6, 6>();
    a.diagonal().array() += lambda;
    tau.head<6>() = a.ldlt().solve(-eq.g.head<6>());
  } else {
    Eigen::Matrix<double, 7, 7> a = eq.h;
    a.diagonal().array() += lambda;
    tau = a.ldlt().solve(-eq.g);
  }
  return tau;
}

void emit_trace(std::ostream* out, int iter, double cost, double lambda,
                double step_norm) {
  if (!out) return;
  char line[128];
  std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g\n", iter, cost,
                lambda, step_norm);
  *out << line;
}

}  // namespace

Vec2 tracking_residual(const Sim3Pose& t, const TrackedMatch& match,
                       const Intrinsics& intr,
                       Eigen::Matrix<double, 2, 7>* jacobian) {
  const Vec3 y = t.apply(match.point);
  if (!(y.z() > kMinDepth)) {
    fail(ErrorCode::PointBehindCamera,
         "transformed match point has z = " + std::to_string(y.z()));
  }
  const double sq = std::max(match.q, kConfidenceFloor);
  if (jacobian) {
    jacobian->leftCols<3>() = -sq * project_jacobian(intr, y);
    jacobian->middleCols<3>(3) = jacobian->leftCols<3>() * -skew(y);
    jacobian->col(6).setZero();
  }
  return (match.pixel - project(intr, y)) * sq;
}

TrackingProblem make_tracking_problem(const CorrespondenceSet& matches,
                                      const Grid<Vec3>& source_points,
                                      const Grid<float>* motion_mask,
                                      const Intrinsics& intr,
                                      const Sim3Pose& init) {
  TrackingProblem prob;
  prob.intr = intr;
  prob.init = init;
  prob.matches.reserve(matches.pairs.size());
  for (const Correspondence& c : matches.pairs) {
    if (!source_points.contains(c.qu, c.qv)) {
      fail(ErrorCode::ShapeMismatch, "match source pixel outside point map");
    }
    TrackedMatch m;
    m.pixel = Vec2(c.pu, c.pv);
    m.point = source_points.at(c.qu, c.qv);
    m.q = c.weight;
    if (motion_mask) {
      if (!motion_mask->contains(c.pu, c.pv)) {
        fail(ErrorCode::ShapeMismatch, "match target pixel outside motion mask");
      }
      m.mask = motion_mask->at(c.pu, c.pv);
    }
    prob.matches.push_back(m);
  }
  return prob;
}

TrackingResult track(const TrackingProblem& problem) {
  if (problem.huber_delta <= 0.0 || problem.max_iters < 1 || problem.tol < 0.0) {
    fail(ErrorCode::ConfigError, "tracking needs huber_delta > 0, max_iters >= 1");
  }
  // Mask-zero matches are removed up front, which makes masking a subset
  // bit-identical to deleting it.
  std::vector<TrackedMatch> active;
  active.reserve(problem.matches.size());
  for (const TrackedMatch& m : problem.matches) {
    if (m.mask > 0.0) active.push_back(m);
  }
  if (active.size() < 7) {
    fail(ErrorCode::InsufficientMatches,
         std::to_string(active.size()) + " matches survive the motion mask");
  }

  const double delta = problem.huber_delta;
  TrackingResult res;
  res.pose = problem.init;
  double cost = robust_cost_at(active, res.pose, problem.intr, delta);
  if (!std::isfinite(cost)) fail(ErrorCode::DivergedNaN, "non-finite initial cost");
  double lambda = kLambdaInit;

  for (int iter = 1; iter <= problem.max_iters; ++iter) {
    res.iterations = iter;
    const NormalEquations eq =
        accumulate(active, res.pose, problem.intr, delta, /*robust=*/true);
    if (!eq.h.allFinite() || !eq.g.allFinite()) {
      fail(ErrorCode::DivergedNaN, "non-finite normal equations");
    }
    const Vec7 tau = solve_step(eq, lambda, problem.freeze_scale);
    if (!tau.allFinite()) fail(ErrorCode::DivergedNaN, "non-finite step");
    const double step_norm = tau.norm();
    const Sim3Pose trial = retract(tau, res.pose);
    const double trial_cost = robust_cost_at(active, trial, problem.intr, delta);
    if (!std::isfinite(trial_cost)) fail(ErrorCode::DivergedNaN, "non-finite cost");

    const bool accept = trial_cost <= cost;
    if (accept) {
      res.pose = trial;
      cost = trial_cost;
    }
    emit_trace(problem.trace, iter, cost, lambda, step_norm);
    lambda = accept ? lambda / 3.0 : lambda * 10.0;
    // A sub-tolerance proposal means the current point is stationary for the
    // present damping, whether or not the step cleared the rounding floor.
    if (step_norm < problem.tol) {
      res.converged = true;
      break;
    }
  }
  res.final_cost = cost;

  // Trim-and-polish: matches outside the robust kernel's quadratic basin are
  // gross outliers; re-solving on the survivors alone removes their residual
  // pull on the estimate. The polish never worsens its own trimmed cost and
  // the reported final_cost stays the damped solve's.
  std::vector<TrackedMatch> inliers;
  inliers.reserve(active.size());
  for (const TrackedMatch& m : active) {
    const Vec3 y = res.pose.apply(m.point);
    if (!(y.z() > kMinDepth)) continue;
    const double sq = std::max(m.q, kConfidenceFloor);
    if (((m.pixel - project(problem.intr, y)) * sq).norm() <= delta) {
      inliers.push_back(m);
    }
  }
  if (inliers.size() >= 7) {
    Sim3Pose pose = res.pose;
    double quad = accumulate(inliers, pose, problem.intr, delta, false).cost;
    for (int i = 0; i < kPolishIters; ++i) {
      const NormalEquations eq =
          accumulate(inliers, pose, problem.intr, delta, /*robust=*/false);
      if (!eq.h.allFinite() || !eq.g.allFinite() || eq.in_front < 7) break;
      const Vec7 tau = solve_step(eq, 0.0, /*freeze_scale=*/true);
      if (!tau.allFinite()) break;
      const Sim3Pose trial = retract(tau, pose);
      const double trial_cost =
          accumulate(inliers, trial, problem.intr, delta, false).cost;
      if (!std::isfinite(trial_cost) || trial_cost > quad) break;
      pose = trial;
      quad = trial_cost;
      if (tau.norm() < problem.tol) break;
    }
    res.pose = pose;
  }

  int within = 0;
  for (const TrackedMatch& m : active) {
    const Vec3 y = res.pose.apply(m.point);
    if (!(y.z() > kMinDepth)) continue;  // behind camera counts as an outlier
    const double sq = std::max(m.q, kConfidenceFloor);
    within += ((m.pixel - project(problem.intr, y)) * sq).norm() <= delta;
  }
  res.inlier_fraction = double(within) / double(active.size());
  return res;
}

}  // namespace m3
