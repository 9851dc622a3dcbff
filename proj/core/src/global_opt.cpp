#include "m3/backend/global_opt.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

namespace m3 {

namespace {

constexpr double kConfidenceFloor = 0.05;
constexpr double kMinDepth = 1e-6;
constexpr double kLambdaInit = 1e-4;
constexpr int kDenseLimit = 30;  // keyframe count below which the solve is dense

double huber_cost(double e, double delta) {
  return e <= delta ? 0.5 * e * e : delta * (e - 0.5 * delta);
}

double huber_weight(double e, double delta) {
  return e <= delta ? 1.0 : delta / e;
}

struct Term {
  Vec3 point;   // keyframe j's fused point, local coords
  Vec2 pixel;   // measured pixel in keyframe i
  double sq;    // max(match confidence, floor)
  double mask;  // motion-map weight at the pixel
};

struct EdgeTerms {
  int i = 0;
  int j = 0;
  std::vector<Term> terms;
};

std::vector<EdgeTerms> collect_terms(const KeyframeGraph& graph) {
  std::vector<EdgeTerms> out;
  out.reserve(graph.edges().size());
  for (const GraphEdge& e : graph.edges()) {
    EdgeTerms et;
    et.i = e.i;
    et.j = e.j;
    const KeyframeNode& ni = graph.node(e.i);
    const KeyframeNode& nj = graph.node(e.j);
    for (const Correspondence& c : e.matches.pairs) {
      if (nj.fused_weight.at(c.qu, c.qv) <= 0.0) continue;
      const double mask =
          ni.motion.empty() ? 1.0 : ni.motion.at(c.pu, c.pv);
      if (mask <= 0.0) continue;
      et.terms.push_back(Term{nj.fused.at(c.qu, c.qv), Vec2(c.pu, c.pv),
                              std::max(c.weight, kConfidenceFloor), mask});
    }
    if (et.terms.size() < 7) {
      fail(ErrorCode::InsufficientMatches,
           "edge " + std::to_string(e.i) + "-" + std::to_string(e.j) +
               " has " + std::to_string(et.terms.size()) +
               " usable matches");
    }
    out.push_back(std::move(et));
  }
  return out;
}

void check_connected(const KeyframeGraph& graph, int fixed) {
  const int n = graph.size();
  std::vector<std::vector<int>> adj(n);
  for (const GraphEdge& e : graph.edges()) {
    adj[e.i].push_back(e.j);
    adj[e.j].push_back(e.i);
  }
  std::vector<char> seen(n, 0);
  std::queue<int> q;
  q.push(fixed);
  seen[fixed] = 1;
  int reached = 0;
  while (!q.empty()) {
    const int k = q.front();
    q.pop();
    ++reached;
    for (int nb : adj[k]) {
      if (!seen[nb]) {
        seen[nb] = 1;
        q.push(nb);
      }
    }
  }
  if (reached != n) {
    fail(ErrorCode::DisconnectedGraph,
         std::to_string(n - reached) + " keyframes unreachable from anchor");
  }
}

double eval_cost(const std::vector<EdgeTerms>& edges,
                 const std::vector<Sim3Pose>& poses, const Intrinsics& intr,
                 double delta) {
  double cost = 0.0;
  for (const EdgeTerms& e : edges) {
    const Sim3Pose t_ij = poses[e.i].inverse() * poses[e.j];
    for (const Term& t : e.terms) {
      const Vec3 y = t_ij.apply(t.point);
      if (!(y.z() > kMinDepth)) continue;
      const double err = ((t.pixel - project(intr, y)) * t.sq).norm();
      cost += t.mask * huber_cost(err, delta);
    }
  }
  return cost;
}

}  // namespace

double global_cost(const KeyframeGraph& graph, double huber_delta) {
  const std::vector<EdgeTerms> edges = collect_terms(graph);
  std::vector<Sim3Pose> poses;
  for (int k = 0; k < graph.size(); ++k) poses.push_back(graph.node(k).pose);
  return eval_cost(edges, poses, graph.intrinsics(), huber_delta);
}

OptimizeResult optimize_global(KeyframeGraph& graph,
                               const OptimizeConfig& cfg) {
  const int n = graph.size();
  if (cfg.fixed < 0 || cfg.fixed >= n) {
    fail(ErrorCode::ConfigError, "anchor keyframe out of range");
  }
  if (cfg.max_iters < 1 || cfg.huber_delta <= 0.0) {
    fail(ErrorCode::ConfigError, "optimize needs max_iters >= 1, delta > 0");
  }
  check_connected(graph, cfg.fixed);
  const std::vector<EdgeTerms> edges = collect_terms(graph);
  const Intrinsics& intr = graph.intrinsics();
  const double delta = cfg.huber_delta;

  // Variable layout: 6 tangent coordinates (translation, rotation) per
  // keyframe except the anchor. The scale coordinate is frozen: pixel
  // reprojection of fixed point maps is exactly invariant under scaling any
  // relative pose's (s, t) jointly, so every edge carries a one-dimensional
  // null ray and scales would drift without ever changing the energy. Scale
  // consistency is supplied upstream by the per-batch metric normalization
  // of the incoming point maps, not by this solve.
  std::vector<int> slot(n, -1);
  int n_var = 0;
  for (int k = 0; k < n; ++k) {
    if (k != cfg.fixed) slot[k] = 6 * n_var++;
  }
  const int dim = 6 * n_var;

  std::vector<Sim3Pose> poses;
  poses.reserve(n);
  for (int k = 0; k < n; ++k) poses.push_back(graph.node(k).pose);

  OptimizeResult res;
  double cost = eval_cost(edges, poses, intr, delta);
  if (!std::isfinite(cost)) fail(ErrorCode::DivergedNaN, "non-finite cost");
  res.initial_cost = cost;
  double lambda = kLambdaInit;

  Eigen::MatrixXd h_dense;
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd g(dim);
  const bool dense = n < kDenseLimit;

  for (int iter = 1; iter <= cfg.max_iters && dim > 0; ++iter) {
    res.iterations = iter;
    if (dense) {
      h_dense.setZero(dim, dim);
    } else {
      trips.clear();
    }
    g.setZero();

    // Accumulate the normal equations. For each term the two pose Jacobians
    // are negatives of each other: moving i or j by the same tangent leaves
    // the relative transform unchanged.
    for (const EdgeTerms& e : edges) {
      const Sim3Pose t_i_inv = poses[e.i].inverse();
      const double s_inv = t_i_inv.scale();
      const Mat3 r_inv = s_inv * t_i_inv.rotation();  // d(T_i^-1 w)/dw
      const int si = slot[e.i];
      const int sj = slot[e.j];
      Eigen::Matrix<double, 6, 6> h_ii, h_jj, h_ij;
      h_ii.setZero();
      h_jj.setZero();
      h_ij.setZero();
      Eigen::Matrix<double, 6, 1> g_i = Eigen::Matrix<double, 6, 1>::Zero();
      Eigen::Matrix<double, 6, 1> g_j = Eigen::Matrix<double, 6, 1>::Zero();
      for (const Term& t : e.terms) {
        const Vec3 w = poses[e.j].apply(t.point);
        const Vec3 y = t_i_inv.apply(w);
        if (!(y.z() > kMinDepth)) continue;
        const Vec2 r = (t.pixel - project(intr, y)) * t.sq;
        const Eigen::Matrix<double, 2, 3> a =
            t.sq * project_jacobian(intr, y) * r_inv;
        Eigen::Matrix<double, 2, 6> b;  // dr/dxi_i = -dr/dxi_j
        b.leftCols<3>() = a;
        b.rightCols<3>() = -a * skew(w);
        const double wgt = t.mask * huber_weight(r.norm(), delta);
        const Eigen::Matrix<double, 6, 6> btb = wgt * b.transpose() * b;
        const Eigen::Matrix<double, 6, 1> btr = wgt * b.transpose() * r;
        h_ii += btb;
        h_jj += btb;
        h_ij -= btb;
        g_i += btr;
        g_j -= btr;
      }
      if (!h_ii.allFinite() || !g_i.allFinite()) {
        fail(ErrorCode::DivergedNaN, "non-finite normal equations");
      }
      auto scatter = [&](int row, int col,
                         const Eigen::Matrix<double, 6, 6>& blk) {
        if (row < 0 || col < 0) return;
        if (dense) {
          h_dense.block<6, 6>(row, col) += blk;
        } else {
          for (int r = 0; r < 6; ++r) {
            for (int c = 0; c < 6; ++c) {
              trips.emplace_back(row + r, col + c, blk(r, c));
            }
          }
        }
      };
      scatter(si, si, h_ii);
      scatter(sj, sj, h_jj);
      scatter(si, sj, h_ij);
      scatter(sj, si, h_ij.transpose());
      if (si >= 0) g.segment<6>(si) += g_i;
      if (sj >= 0) g.segment<6>(sj) += g_j;
    }

    Eigen::VectorXd step(dim);
    if (dense) {
      Eigen::MatrixXd a = h_dense;
      a.diagonal().array() += lambda;
      step = a.ldlt().solve(-g);
    } else {
      Eigen::SparseMatrix<double> a(dim, dim);
      for (int d = 0; d < dim; ++d) trips.emplace_back(d, d, lambda);
      a.setFromTriplets(trips.begin(), trips.end());
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
      if (solver.info() != Eigen::Success) {
        fail(ErrorCode::DivergedNaN, "sparse factorization failed");
      }
      step = solver.solve(-g);
    }
    if (!step.allFinite()) fail(ErrorCode::DivergedNaN, "non-finite step");
    const double step_norm = step.norm();

    std::vector<Sim3Pose> trial = poses;
    for (int k = 0; k < n; ++k) {
      if (slot[k] >= 0) {
        Vec7 tau = Vec7::Zero();
        tau.head<6>() = step.segment<6>(slot[k]);
        trial[k] = retract(tau, poses[k]);
      }
    }
    const double trial_cost = eval_cost(edges, trial, intr, delta);
    if (!std::isfinite(trial_cost)) {
      fail(ErrorCode::DivergedNaN, "non-finite cost");
    }
    const bool accept = trial_cost <= cost;
    if (accept) {
      poses.swap(trial);
      cost = trial_cost;
    }
    res.cost_trace.push_back(cost);
    lambda = accept ? lambda / 3.0 : lambda * 10.0;
    if (step_norm < cfg.tol) {
      res.converged = true;
      break;
    }
  }

  res.final_cost = cost;
  for (int k = 0; k < n; ++k) graph.pose(k) = poses[k];
  graph.clear_global_opt_flag();
  return res;
}

}  // namespace m3
