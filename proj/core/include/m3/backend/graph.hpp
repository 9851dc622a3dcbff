#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "m3/geom/trajectory.hpp"
#include "m3/matching/matcher.hpp"

namespace m3 {

// One keyframe of the factor graph. The maintained point map `fused` starts
// as the observation's points weighted by confidence and is thereafter
// refined by weighted-average fusion; a pixel is live once its accumulated
// weight is positive. `motion` is the keyframe's motion map (empty means
// all-static) and weights this keyframe's pixels when it is the measurement
// side of an edge.
struct KeyframeNode {
  uint64_t frame_id = 0;
  Sim3Pose pose;  // world-from-camera
  FrameObservation obs;
  Grid<Vec3> fused;
  Grid<double> fused_weight;
  Grid<float> motion;
  Eigen::VectorXd global_desc;  // renormalized mean of valid descriptors
};

enum class EdgeKind { Sequential, Retrieval, Loop };

const char* edge_kind_name(EdgeKind kind);

// Match factor between two keyframes. `i` is the measurement side (its pixels
// and motion map enter the energy), `j` is the point side (its fused map is
// reprojected). matches follow the matcher convention: source pixels index
// keyframe j, target pixels keyframe i.
struct GraphEdge {
  int i = 0;
  int j = 0;
  EdgeKind kind = EdgeKind::Sequential;
  CorrespondenceSet matches;
};

struct CloseLoopConfig {
  MatchConfig match;      // widened search for drifted revisits
  double ratio_min = 0.3; // minimum matched fraction of the candidate's pixels
  int max_edges = 3;
  CloseLoopConfig() { match.radius = 16; }
};

// Keyframe factor graph. Nodes are indexed densely in insertion order; every
// mutation re-checks that the edge set stays a simple graph (no self-loops,
// no duplicate unordered pairs).
class KeyframeGraph {
 public:
  explicit KeyframeGraph(const Intrinsics& intr, MatchConfig sequential = {})
      : intr_(intr), sequential_(sequential) {}

  // Appends a node: fused map seeded from the observation (weight = Q on
  // valid pixels), global descriptor = renormalized mean of valid
  // descriptors, and a sequential edge to the previous keyframe matched with
  // the stored poses. A sequential edge with fewer than 7 matches cannot
  // constrain a Sim(3) factor and is dropped, which can leave the graph
  // disconnected. Returns the new keyframe's index.
  int add_keyframe(const FrameObservation& obs, const Sim3Pose& pose,
                   const Grid<float>* motion = nullptr);

  // Ranks keyframes older than the `exclude_recent` newest by cosine
  // similarity of their global descriptors against `query`; ties break toward
  // the smaller index. Returns at most n_c indices, best first. n_c < 0 picks
  // the default min(23, size()).
  std::vector<int> retrieve_candidates(const Eigen::VectorXd& query, int n_c,
                                       int exclude_recent) const;

  // Wide-radius verification of retrieval candidates: each candidate is
  // matched against the current keyframe, scored by the fraction of its valid
  // pixels that matched, and the best qualifying few become loop edges.
  // Returns the indices (into edges()) of the edges added.
  std::vector<int> close_loop(int current, const std::vector<int>& candidates,
                              const CloseLoopConfig& cfg = {});

  int size() const { return static_cast<int>(nodes_.size()); }
  const KeyframeNode& node(int k) const { return nodes_[k]; }
  KeyframeNode& node(int k) { return nodes_[k]; }
  const std::vector<GraphEdge>& edges() const { return edges_; }

  Sim3Pose& pose(int k) { return nodes_[k].pose; }

  bool needs_global_opt() const { return needs_global_opt_; }
  void clear_global_opt_flag() { needs_global_opt_ = false; }

  const Intrinsics& intrinsics() const { return intr_; }

  // Snapshot exports: keyframe poses as trajectory lines keyed by frame id,
  // and the edge list as `i,j,kind,match_count` CSV.
  void write_nodes_tum(std::ostream& out) const;
  void write_edges_csv(std::ostream& out) const;

 private:
  void check_simple(const GraphEdge& candidate) const;

  Intrinsics intr_;
  MatchConfig sequential_;
  std::vector<KeyframeNode> nodes_;
  std::vector<GraphEdge> edges_;
  bool needs_global_opt_ = false;
};

// Weighted-average point-map update: per pixel,
//   fused <- (W * fused + w * p) / (W + w),  W <- W + w.
// Zero-weight pixels stay untouched (and dead if they have never received
// weight). Reports ShapeMismatch when the grids disagree with the node.
void fuse_pointmap(KeyframeNode& node, const Grid<Vec3>& new_points,
                   const Grid<float>& new_weights);

// Mean of the valid pixels' descriptors, scaled back to unit norm (zero when
// nothing is valid or the mean vanishes).
Eigen::VectorXd pooled_descriptor(const FrameObservation& obs);

}  // namespace m3
