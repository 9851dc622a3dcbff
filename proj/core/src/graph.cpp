#include "m3/backend/graph.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace m3 {

const char* edge_kind_name(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::Sequential: return "sequential";
    case EdgeKind::Retrieval: return "retrieval";
    case EdgeKind::Loop: return "loop";
  }
  return "?";
}

Eigen::VectorXd pooled_descriptor(const FrameObservation& obs) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(obs.desc_dim);
  int64_t count = 0;
  for (int v = 0; v < obs.valid.height(); ++v) {
    for (int u = 0; u < obs.valid.width(); ++u) {
      if (!obs.valid.at(u, v)) continue;
      const float* d = obs.desc(u, v);
      for (int c = 0; c < obs.desc_dim; ++c) mean[c] += d[c];
      ++count;
    }
  }
  if (count == 0) return mean;
  mean /= static_cast<double>(count);
  const double norm = mean.norm();
  return norm > 0.0 ? Eigen::VectorXd(mean / norm) : mean;
}

void fuse_pointmap(KeyframeNode& node, const Grid<Vec3>& new_points,
                   const Grid<float>& new_weights) {
  if (!new_points.same_shape(node.fused) ||
      !new_weights.same_shape(node.fused)) {
    fail(ErrorCode::ShapeMismatch, "fusion grids do not match the keyframe");
  }
  for (int v = 0; v < node.fused.height(); ++v) {
    for (int u = 0; u < node.fused.width(); ++u) {
      const double w = new_weights.at(u, v);
      if (w < 0.0) fail(ErrorCode::ConfigError, "negative fusion weight");
      if (w == 0.0) continue;
      const double total = node.fused_weight.at(u, v) + w;
      node.fused.at(u, v) =
          (node.fused_weight.at(u, v) * node.fused.at(u, v) +
           w * new_points.at(u, v)) /
          total;
      node.fused_weight.at(u, v) = total;
    }
  }
}

void KeyframeGraph::check_simple(const GraphEdge& candidate) const {
  if (candidate.i == candidate.j) {
    fail(ErrorCode::ConfigError, "self-loop edge rejected");
  }
  for (const GraphEdge& e : edges_) {
    const bool same = (e.i == candidate.i && e.j == candidate.j) ||
                      (e.i == candidate.j && e.j == candidate.i);
    if (same) fail(ErrorCode::ConfigError, "duplicate edge rejected");
  }
}

int KeyframeGraph::add_keyframe(const FrameObservation& obs,
                                const Sim3Pose& pose,
                                const Grid<float>* motion) {
  KeyframeNode node;
  node.frame_id = obs.frame_id;
  node.pose = pose;
  node.obs = obs;
  const int w = obs.valid.width();
  const int h = obs.valid.height();
  node.fused = Grid<Vec3>(w, h, Vec3::Zero());
  node.fused_weight = Grid<double>(w, h, 0.0);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (!obs.valid.at(u, v)) continue;
      node.fused.at(u, v) = obs.X.at(u, v);
      node.fused_weight.at(u, v) = obs.Q.at(u, v);
    }
  }
  if (motion) node.motion = *motion;
  node.global_desc = pooled_descriptor(obs);

  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(std::move(node));
  if (id > 0) {
    // Sequential factor: previous keyframe is the point side, the new one the
    // measurement side.
    GraphEdge e;
    e.i = id;
    e.j = id - 1;
    e.kind = EdgeKind::Sequential;
    e.matches =
        coarse_to_fine_match(nodes_[id - 1].obs, nodes_[id].obs,
                             nodes_[id - 1].pose, nodes_[id].pose, intr_,
                             sequential_);
    // An edge that cannot support a pose factor (fewer matches than the
    // Sim(3) DOF) is useless and is dropped rather than stored.
    if (e.matches.pairs.size() >= 7) {
      check_simple(e);
      edges_.push_back(std::move(e));
    }
  }
  return id;
}

std::vector<int> KeyframeGraph::retrieve_candidates(
    const Eigen::VectorXd& query, int n_c, int exclude_recent) const {
  const int n_k = size();
  if (n_c < 0) n_c = std::min(23, n_k);
  const int last = n_k - std::max(exclude_recent, 0);
  std::vector<std::pair<double, int>> ranked;
  for (int k = 0; k < last; ++k) {
    double sim = 0.0;
    if (nodes_[k].global_desc.size() == query.size()) {
      sim = nodes_[k].global_desc.dot(query);
    }
    ranked.emplace_back(sim, k);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<int> out;
  for (int k = 0; k < std::min<int>(n_c, ranked.size()); ++k) {
    out.push_back(ranked[k].second);
  }
  return out;
}

std::vector<int> KeyframeGraph::close_loop(int current,
                                           const std::vector<int>& candidates,
                                           const CloseLoopConfig& cfg) {
  struct Scored {
    double ratio;
    int candidate;
    CorrespondenceSet matches;
  };
  std::vector<Scored> scored;
  for (int cand : candidates) {
    if (cand == current) continue;
    bool exists = false;
    for (const GraphEdge& e : edges_) {
      if ((e.i == current && e.j == cand) || (e.i == cand && e.j == current)) {
        exists = true;
        break;
      }
    }
    if (exists) continue;
    CorrespondenceSet m = coarse_to_fine_match(
        nodes_[cand].obs, nodes_[current].obs, nodes_[cand].pose,
        nodes_[current].pose, intr_, cfg.match);
    const double ratio =
        m.stats.source_valid > 0
            ? static_cast<double>(m.pairs.size()) / m.stats.source_valid
            : 0.0;
    if (ratio > cfg.ratio_min) {
      scored.push_back(Scored{ratio, cand, std::move(m)});
    }
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    return a.ratio != b.ratio ? a.ratio > b.ratio : a.candidate < b.candidate;
  });

  std::vector<int> added;
  for (int k = 0; k < std::min<int>(cfg.max_edges, scored.size()); ++k) {
    GraphEdge e;
    e.i = current;
    e.j = scored[k].candidate;
    e.kind = EdgeKind::Loop;
    e.matches = std::move(scored[k].matches);
    check_simple(e);
    added.push_back(static_cast<int>(edges_.size()));
    edges_.push_back(std::move(e));
    needs_global_opt_ = true;
  }
  return added;
}

void KeyframeGraph::write_nodes_tum(std::ostream& out) const {
  Trajectory traj;
  traj.reserve(nodes_.size());
  for (const KeyframeNode& n : nodes_) {
    traj.push_back(TimedPose{static_cast<double>(n.frame_id), n.pose});
  }
  write_tum(out, traj);
}

void KeyframeGraph::write_edges_csv(std::ostream& out) const {
  out << "i,j,kind,match_count\n";
  for (const GraphEdge& e : edges_) {
    out << e.i << ',' << e.j << ',' << edge_kind_name(e.kind) << ','
        << e.matches.pairs.size() << '\n';
  }
}

}  // namespace m3
