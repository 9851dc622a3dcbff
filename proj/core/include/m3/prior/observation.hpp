#pragma once

#include <cstdint>
#include <vector>

#include "m3/common/grid.hpp"
#include "m3/common/image.hpp"
#include "m3/geom/camera.hpp"
#include "m3/geom/sim3.hpp"

namespace m3 {

// One frame's worth of geometric-prior output: local point map, camera pose,
// confidence, unit-norm descriptors, match confidence, and validity mask.
//
// Point maps are double precision in memory (geometric identities like exact
// backprojection hold to 1e-9); the serialized dump quantizes them to float32.
// Poses are kept both as the raw 4x4 matrix (the serialized form, preserved
// bitwise through dumps) and as the decomposed similarity transform.
struct FrameObservation {
  uint64_t frame_id = 0;

  Mat4 pose_raw = Mat4::Identity();  // camera-to-world, row-major on disk
  Sim3Pose pose;                     // decomposition of pose_raw

  double metric_scale = 1.0;  // batch-level scalar, replicated per frame

  int desc_dim = 0;
  Grid<Vec3> X;                // local point map (camera frame)
  Grid<float> C;               // confidence, >= 0
  std::vector<float> D;        // descriptors, (v*W + u)*desc_dim + c
  Grid<float> Q;               // match confidence in [0, 1]
  Grid<uint8_t> valid;         // 1 where the above channels are meaningful

  int width() const { return X.width(); }
  int height() const { return X.height(); }

  const float* desc(int u, int v) const {
    return D.data() + (static_cast<size_t>(v) * X.width() + u) * desc_dim;
  }
  float* desc(int u, int v) {
    return D.data() + (static_cast<size_t>(v) * X.width() + u) * desc_dim;
  }

  void set_pose(const Sim3Pose& p) {
    pose = p;
    pose_raw = p.matrix();
  }
  void set_pose_raw(const Mat4& m) {
    pose_raw = m;
    pose = Sim3Pose::from_matrix(m);
  }
};

// A single inference pass over up to kMaxBatchFrames frames.
struct InferenceBatch {
  static constexpr int kMaxFrames = 16;

  std::vector<FrameObservation> frames;
  double metric_scale = 1.0;
};

}  // namespace m3
