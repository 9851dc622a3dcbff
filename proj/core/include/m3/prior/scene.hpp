#pragma once

#include <cstdint>
#include <vector>

#include "m3/prior/observation.hpp"

namespace m3 {

enum class ScenePreset { Loop, Corridor, Dynamic };

// Noise model applied by the oracle on top of exact geometry.
struct SceneNoise {
  double point_frac = 0.0;  // per-component point noise, fraction of diameter
  double descriptor = 0.0;  // per-component descriptor noise before renorm
  double pose = 0.0;        // tangent magnitude: radians / fraction-of-diameter
  double scale_log = 0.0;   // stddev of per-batch log scale jitter
};

struct SceneConfig {
  ScenePreset preset = ScenePreset::Loop;
  int frames = 200;
  int width = 64;
  int height = 64;
  int desc_dim = 24;
  uint64_t seed = 1;
  SceneNoise noise;
};

struct ScenePoint {
  Vec3 position;               // world; for dynamic points, pose at frame 0
  Eigen::VectorXf descriptor;  // unit-norm seed
  Eigen::Vector3f color;       // quantized to the u8 lattice (k/255)
};

// Immutable synthetic world. Descriptor seeds are unit-norm cosine/sine
// Fourier pairs over a fixed frequency table, so pairwise similarity is a
// deterministic kernel of world displacement: ~1 at sub-pixel offsets,
// decaying below 0.5 past the declared correlation length. Dynamic points
// (when present) use a disjoint block of descriptor dimensions, making them
// exactly orthogonal to every static descriptor.
struct SyntheticScene {
  SceneConfig config;
  Intrinsics intrinsics;
  std::vector<ScenePoint> static_points;
  std::vector<ScenePoint> dynamic_points;
  std::vector<Sim3Pose> trajectory;      // ground truth camera-to-world, s = 1
  std::vector<Sim3Pose> dynamic_motion;  // world-frame rigid motion per frame
  double diameter = 1.0;
  double descriptor_corr_length = 0.0;   // static, world units
  double dynamic_corr_length = 0.0;      // dynamic block, world units (0 if none)

  double sigma_x() const { return config.noise.point_frac * diameter; }
};

SyntheticScene make_scene(const SceneConfig& config);

// Exact per-frame ground truth recorded alongside each rendered batch.
struct GtFrame {
  Sim3Pose pose;          // exact camera-to-world
  Grid<uint8_t> dynamic;  // 1 where the z-buffer winner is a dynamic point
  Grid<Vec3> world;       // exact world coordinates of the winner
  Grid<Vec3> local;       // exact camera-frame coordinates of the winner
};

struct OracleResult {
  InferenceBatch batch;
  std::vector<ImageRgb> images;  // captured frames; u8-lattice colors
  std::vector<GtFrame> gt;
};

// Renders the requested frames into an inference batch.
//
// Per frame: scene points are z-buffered into the pixel grid (nearest-pixel);
// the observed X is the winner's depth backprojected through the pixel center
// (so X lies exactly on the pixel ray) plus isotropic noise; D is the
// winner's seed renormalized after additive noise; Q = 1 / valid = 1 on
// covered pixels; C = 1/(1+sigma_X) on covered pixels. Poses are perturbed by
// exp of a random tangent of magnitude sigma_T, and one log-normal scale
// jitter per call multiplies every X array and pose translation (ground truth
// untouched). Deterministic: all draws are seeded from (scene seed, frame_ids).
OracleResult oracle_render_full(const SyntheticScene& scene,
                                const std::vector<uint64_t>& frame_ids);

InferenceBatch oracle_render(const SyntheticScene& scene,
                             const std::vector<uint64_t>& frame_ids);

}  // namespace m3
