#include "m3/prior/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "m3/common/error.hpp"
#include "m3/common/rng.hpp"

namespace m3 {
namespace {

constexpr double kTwoPi = 6.283185307179586;

// Relative depth band treated as one surface layer during pixel assignment;
// must stay below the smallest occluder/occludee depth ratio in any preset
// (the sliding band sits 2.9% in front of the wall behind it).
constexpr double kLayerTol = 0.02;

// A contiguous block of cosine/sine descriptor pairs over a fixed random
// frequency table. Evaluated at a world position p, pair j contributes
// weight * (cos(k_j.p + b_j), sin(k_j.p + b_j)) / sqrt(pairs), so the block
// has exactly norm `weight` and the similarity of two evaluations is
// weight^2 * (1/P) sum_j cos(k_j.d), a stationary kernel of the displacement
// d. A descriptor field is a list of blocks over disjoint component ranges;
// their squared weights sum to one so every descriptor is exactly unit-norm.
struct DescBlock {
  int offset = 0;
  double weight = 1.0;
  std::vector<Vec3> freq;
  std::vector<double> phase;
};

using DescField = std::vector<DescBlock>;

// Matching-scale block: Gaussian frequencies with correlation length ~ ell,
// so nearby surface points stay similar and far ones decorrelate.
DescBlock make_desc_block(RngStream& rng, int offset, int pairs, double ell,
                          double weight = 1.0) {
  DescBlock block;
  block.offset = offset;
  block.weight = weight;
  block.freq.reserve(pairs);
  block.phase.reserve(pairs);
  for (int j = 0; j < pairs; ++j) {
    block.freq.emplace_back(rng.normal() / ell, rng.normal() / ell,
                            rng.normal() / ell);
    block.phase.push_back(rng.uniform(0.0, kTwoPi));
  }
  return block;
}

// Place-scale block: wavelengths between extent/2 and extent (uniform
// magnitude, uniform direction), so the field sweeps one or two periods
// across the scene. Pooled over a view it neither cancels (wavelength far
// exceeds a view) nor degenerates to a constant, which is what makes the
// renormalized-mean global descriptor distinguish viewpoints.
DescBlock make_place_block(RngStream& rng, int offset, int pairs,
                           double extent, double weight) {
  DescBlock block;
  block.offset = offset;
  block.weight = weight;
  block.freq.reserve(pairs);
  block.phase.reserve(pairs);
  for (int j = 0; j < pairs; ++j) {
    Vec3 dir(rng.normal(), rng.normal(), rng.normal());
    dir.normalize();
    block.freq.push_back(dir * (kTwoPi / extent * rng.uniform(1.0, 2.0)));
    block.phase.push_back(rng.uniform(0.0, kTwoPi));
  }
  return block;
}

Eigen::VectorXf eval_descriptor(const DescField& field, int dim,
                                const Vec3& p) {
  Eigen::VectorXf d = Eigen::VectorXf::Zero(dim);
  for (const DescBlock& block : field) {
    const double amp =
        block.weight / std::sqrt(static_cast<double>(block.freq.size()));
    for (size_t j = 0; j < block.freq.size(); ++j) {
      const double arg = block.freq[j].dot(p) + block.phase[j];
      d[block.offset + 2 * static_cast<int>(j)] =
          static_cast<float>(amp * std::cos(arg));
      d[block.offset + 2 * static_cast<int>(j) + 1] =
          static_cast<float>(amp * std::sin(arg));
    }
  }
  return d;
}

// Procedural surface colors: per channel, a sum of world-space sinusoids with
// wavelengths chosen in pixel-equivalents at the preset's working distance.
// The first (highest-frequency, strongest) component is shared across
// channels so luminance keeps its full contrast. Values are clamped to [0,1]
// and quantized to the u8 lattice so PNG round-trips are exact.
struct TexComponent {
  Vec3 freq;
  double phase = 0.0;
  double amp = 0.0;
};
using TexChannel = std::vector<TexComponent>;

TexComponent random_component(RngStream& rng, double wavelength, double amp) {
  Vec3 dir(rng.normal(), rng.normal(), rng.normal());
  dir.normalize();
  return TexComponent{dir * (kTwoPi / wavelength), rng.uniform(0.0, kTwoPi),
                      amp};
}

std::array<TexChannel, 3> make_texture(RngStream& rng, double px2world) {
  const TexComponent backbone = random_component(rng, 4.6 * px2world, 0.34);
  std::array<TexChannel, 3> tex;
  for (auto& channel : tex) {
    channel.push_back(backbone);
    channel.push_back(random_component(rng, 7.3 * px2world, 0.10));
    channel.push_back(random_component(rng, 11.0 * px2world, 0.06));
    channel.push_back(random_component(rng, 16.0 * px2world, 0.04));
  }
  return tex;
}

float quantize_u8(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<float>(std::lround(c * 255.0)) / 255.0f;
}

Eigen::Vector3f eval_color(const std::array<TexChannel, 3>& tex, const Vec3& p) {
  Eigen::Vector3f rgb;
  for (int c = 0; c < 3; ++c) {
    double v = 0.5;
    for (const TexComponent& comp : tex[c]) {
      v += comp.amp * std::sin(comp.freq.dot(p) + comp.phase);
    }
    rgb[c] = quantize_u8(v);
  }
  return rgb;
}

// Jittered lattice over the rectangle origin + s*e1 + t*e2, s in [0,len1],
// t in [0,len2]. Jitter is +-0.35*spacing in-plane and +-normal_jitter along
// e1 x e2, keeping the sampling statistically uniform but aperiodic.
void lattice_patch(RngStream& rng, const Vec3& origin, const Vec3& e1,
                   double len1, const Vec3& e2, double len2, double spacing,
                   double normal_jitter, const DescField& field, int dim,
                   const std::array<TexChannel, 3>& tex,
                   std::vector<ScenePoint>& out) {
  const Vec3 n = e1.cross(e2).normalized();
  const int n1 = std::max(1, static_cast<int>(std::lround(len1 / spacing)));
  const int n2 = std::max(1, static_cast<int>(std::lround(len2 / spacing)));
  out.reserve(out.size() + static_cast<size_t>(n1 + 1) * (n2 + 1));
  for (int i = 0; i <= n1; ++i) {
    for (int j = 0; j <= n2; ++j) {
      const double s = len1 * i / n1 + rng.uniform(-0.35, 0.35) * spacing;
      const double t = len2 * j / n2 + rng.uniform(-0.35, 0.35) * spacing;
      const Vec3 p = origin + s * e1 + t * e2 +
                     rng.uniform(-normal_jitter, normal_jitter) * n;
      out.push_back(
          ScenePoint{p, eval_descriptor(field, dim, p), eval_color(tex, p)});
    }
  }
}

Sim3Pose camera_pose(const Vec3& position, const Vec3& x_axis,
                     const Vec3& y_axis, const Vec3& z_axis) {
  Mat3 r;
  r.col(0) = x_axis;
  r.col(1) = y_axis;
  r.col(2) = z_axis;
  return Sim3Pose(1.0, r, position);
}

double cloud_diameter(const SyntheticScene& scene) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  auto extend = [&](const std::vector<ScenePoint>& pts) {
    for (const ScenePoint& p : pts) {
      lo = lo.cwiseMin(p.position);
      hi = hi.cwiseMax(p.position);
    }
  };
  extend(scene.static_points);
  extend(scene.dynamic_points);
  return (hi - lo).norm();
}

// Camera ring of radius 3 at z = 1 looking radially inward, across the axis
// at the far side of a closed cylindrical room: textured wall of radius 6
// plus floor and ceiling disks. Two choices here are load-bearing for pose
// conditioning. Looking inward: an outward ring has tangential-translation
// flow that almost exactly cancels the yaw flow (ratio r/(R-r) = 1), leaving
// sub-pixel net motion that integer-pixel matching cannot resolve; across
// the axis the ratio drops to r/(R+r) = 1/3. Wide field of view with floor
// and ceiling in frame: the grazing surfaces sweep depth from ~4 to ~9,
// and that parallax plus the ~90 deg f.o.v. stiffens the translation-vs-yaw
// ambiguity that pixel-quantized matches would otherwise slide along.
void build_loop(SyntheticScene& scene, RngStream& rng) {
  const SceneConfig& cfg = scene.config;
  scene.intrinsics.fx = scene.intrinsics.fy = 32.0;
  const double px2world = 7.5 / scene.intrinsics.fx;
  const double ell = 3.1 * px2world;
  scene.descriptor_corr_length = 3.0 * ell;

  RngStream desc_rng(fork_seed(cfg.seed, 11));
  RngStream tex_rng(fork_seed(cfg.seed, 12));
  const double radius = 6.0;
  const int pairs = cfg.desc_dim / 2;
  const int place_pairs = std::max(1, pairs / 4);
  const DescField field = {
      make_desc_block(desc_rng, 0, pairs - place_pairs, ell,
                      std::sqrt(0.75)),
      make_place_block(desc_rng, 2 * (pairs - place_pairs), place_pairs,
                       kTwoPi * radius, 0.5)};
  const auto tex = make_texture(tex_rng, px2world);

  // Well under the nearest pixel footprint (range ~5 / f at the closest
  // visible floor), so nearest-pixel splatting leaves essentially no
  // uncovered pixels anywhere in the room.
  const double spacing = 0.12;
  const double z_lo = -2.5, z_hi = 4.5;
  const int n_arc = static_cast<int>(std::lround(kTwoPi * radius / spacing));
  const int n_z = static_cast<int>(std::lround((z_hi - z_lo) / spacing)) + 1;
  scene.static_points.reserve(static_cast<size_t>(n_arc) * n_z + 16000);
  auto emit = [&](const Vec3& p) {
    scene.static_points.push_back(
        ScenePoint{p, eval_descriptor(field, cfg.desc_dim, p),
                   eval_color(tex, p)});
  };
  for (int a = 0; a < n_arc; ++a) {
    for (int k = 0; k < n_z; ++k) {
      const double phi = kTwoPi * a / n_arc +
                         rng.uniform(-0.35, 0.35) * spacing / radius;
      const double r = radius + rng.uniform(-0.02, 0.02);
      const double z = z_lo + (z_hi - z_lo) * k / (n_z - 1) +
                       rng.uniform(-0.35, 0.35) * spacing;
      emit(Vec3(r * std::cos(phi), r * std::sin(phi), z));
    }
  }
  // The floor and ceiling are seen at grazing angles from as close as ~4.3,
  // so they need a denser lattice than the far wall to stay hole-free under
  // the placement jitter.
  const double disk_spacing = 0.09;
  const int n_xy =
      static_cast<int>(std::lround(2.0 * radius / disk_spacing)) + 1;
  for (int i = 0; i < n_xy; ++i) {
    for (int j = 0; j < n_xy; ++j) {
      const double x = -radius + 2.0 * radius * i / (n_xy - 1) +
                       rng.uniform(-0.35, 0.35) * disk_spacing;
      const double y = -radius + 2.0 * radius * j / (n_xy - 1) +
                       rng.uniform(-0.35, 0.35) * disk_spacing;
      if (x * x + y * y >= radius * radius) continue;
      emit(Vec3(x, y, z_lo + rng.uniform(-0.02, 0.02)));
      emit(Vec3(x, y, z_hi + rng.uniform(-0.02, 0.02)));
    }
  }

  scene.trajectory.reserve(cfg.frames);
  for (int i = 0; i < cfg.frames; ++i) {
    const double phi = kTwoPi * i / cfg.frames;
    const double c = std::cos(phi), s = std::sin(phi);
    scene.trajectory.push_back(camera_pose(Vec3(3.0 * c, 3.0 * s, 1.0),
                                           Vec3(-s, c, 0.0), Vec3(0, 0, -1),
                                           Vec3(-c, -s, 0.0)));
  }
}

// Square-section corridor along +y, camera dollying forward down the middle.
void build_corridor(SyntheticScene& scene, RngStream& rng) {
  const SceneConfig& cfg = scene.config;
  const double px2world = 2.0 / scene.intrinsics.fx;
  const double ell = 3.1 * px2world;
  scene.descriptor_corr_length = 3.0 * ell;

  RngStream desc_rng(fork_seed(cfg.seed, 11));
  RngStream tex_rng(fork_seed(cfg.seed, 12));
  const double y0 = -1.0, y1 = 19.0;
  const int pairs = cfg.desc_dim / 2;
  const int place_pairs = std::max(1, pairs / 4);
  const DescField field = {
      make_desc_block(desc_rng, 0, pairs - place_pairs, ell,
                      std::sqrt(0.75)),
      make_place_block(desc_rng, 2 * (pairs - place_pairs), place_pairs,
                       y1 - y0, 0.5)};
  const auto tex = make_texture(tex_rng, px2world);

  // Nearest visible wall range is ~3.2 (closer rays terminate on the end
  // cap), giving a >=2x footprint-to-spacing margin.
  const double spacing = 0.027;
  const double half = 1.5;
  const Vec3 ey(0, 1, 0), ez(0, 0, 1), ex(1, 0, 0);
  // Left / right walls, floor, ceiling, and an end cap so that forward rays
  // always terminate on geometry.
  lattice_patch(rng, Vec3(-half, y0, -half), ey, y1 - y0, ez, 2 * half,
                spacing, 0.01, field, cfg.desc_dim, tex, scene.static_points);
  lattice_patch(rng, Vec3(half, y0, -half), ey, y1 - y0, ez, 2 * half, spacing,
                0.01, field, cfg.desc_dim, tex, scene.static_points);
  lattice_patch(rng, Vec3(-half, y0, -half), ex, 2 * half, ey, y1 - y0,
                spacing, 0.01, field, cfg.desc_dim, tex, scene.static_points);
  lattice_patch(rng, Vec3(-half, y0, half), ex, 2 * half, ey, y1 - y0, spacing,
                0.01, field, cfg.desc_dim, tex, scene.static_points);
  lattice_patch(rng, Vec3(-half, y1 + 0.5, -half), ex, 2 * half, ez, 2 * half,
                spacing, 0.01, field, cfg.desc_dim, tex, scene.static_points);

  scene.trajectory.reserve(cfg.frames);
  for (int i = 0; i < cfg.frames; ++i) {
    scene.trajectory.push_back(camera_pose(Vec3(0.0, 0.04 * i, 0.0), ex,
                                           Vec3(0, 0, -1), ey));
  }
}

// Camera panning sideways in front of a flat wall at y = 4 (2 px/frame at the
// working distance). A narrow horizontal band hovers at y = 3.9 covering
// ~11% of the image rows and slides along +x at 0.45 px/frame, independent of
// the camera. Band points use a disjoint descriptor block with a much shorter
// correlation length (~1 px), so a band descriptor is orthogonal to every
// wall descriptor and decorrelates from itself under ~2 px of slip.
void build_dynamic(SyntheticScene& scene, RngStream& rng) {
  const SceneConfig& cfg = scene.config;
  const double px2world = 4.0 / scene.intrinsics.fx;
  const double ell = 3.1 * px2world;
  const double ell_dyn = 1.0 * px2world;
  scene.descriptor_corr_length = 3.0 * ell;
  scene.dynamic_corr_length = 3.0 * ell_dyn;

  RngStream desc_rng(fork_seed(cfg.seed, 11));
  RngStream tex_rng(fork_seed(cfg.seed, 12));
  const double step = 2.0 * px2world;           // camera shift per frame
  const double span = step * (cfg.frames - 1);  // total camera travel
  const int static_pairs = cfg.desc_dim / 4;
  const int dyn_pairs = cfg.desc_dim / 2 - static_pairs;
  const int place_pairs = std::max(1, static_pairs / 4);
  const DescField wall_field = {
      make_desc_block(desc_rng, 0, static_pairs - place_pairs, ell,
                      std::sqrt(0.75)),
      make_place_block(desc_rng, 2 * (static_pairs - place_pairs),
                       place_pairs, span + 5.0, 0.5)};
  const DescField band_field = {
      make_desc_block(desc_rng, 2 * static_pairs, dyn_pairs, ell_dyn)};
  const auto wall_tex = make_texture(tex_rng, px2world);
  // Higher-contrast, shorter-wavelength texture for the band.
  std::array<TexChannel, 3> band_tex;
  {
    const TexComponent fine = random_component(tex_rng, 3.1 * px2world, 0.32);
    for (auto& channel : band_tex) {
      channel.push_back(fine);
      channel.push_back(random_component(tex_rng, 5.3 * px2world, 0.14));
    }
  }

  const Vec3 ex(1, 0, 0), ez(0, 0, 1);

  lattice_patch(rng, Vec3(-2.5, 4.0, -2.3), ex, span + 5.0, ez, 4.6, 0.033,
                0.01, wall_field, cfg.desc_dim, wall_tex, scene.static_points);

  // The band must still cover the camera's view after sliding: its right edge
  // plus accumulated slide has to stay ahead of the view frustum's right edge.
  const double band_lo = -3.0;
  const double band_hi = 2.3 + (step - 0.03) * (cfg.frames - 1);
  lattice_patch(rng, Vec3(band_lo, 3.9, 0.35), ex, band_hi - band_lo, ez, 0.44,
                0.03, 0.0, band_field, cfg.desc_dim, band_tex,
                scene.dynamic_points);

  scene.trajectory.reserve(cfg.frames);
  scene.dynamic_motion.reserve(cfg.frames);
  for (int i = 0; i < cfg.frames; ++i) {
    scene.trajectory.push_back(camera_pose(Vec3(step * i, 0.0, 0.0), ex,
                                           Vec3(0, 0, -1), Vec3(0, 1, 0)));
    scene.dynamic_motion.push_back(
        Sim3Pose(1.0, Mat3::Identity(), Vec3(0.03 * i, 0.0, 0.0)));
  }
}

}  // namespace

SyntheticScene make_scene(const SceneConfig& config) {
  if (config.frames < 1 || config.width < 2 || config.height < 2 ||
      config.desc_dim < 4 || config.desc_dim % 4 != 0) {
    fail(ErrorCode::ConfigError, "invalid scene configuration");
  }
  SyntheticScene scene;
  scene.config = config;
  scene.intrinsics = Intrinsics{60.0, 60.0, 0.5 * (config.width - 1),
                                0.5 * (config.height - 1)};

  RngStream lattice_rng(fork_seed(config.seed, 10));
  switch (config.preset) {
    case ScenePreset::Loop:
      build_loop(scene, lattice_rng);
      break;
    case ScenePreset::Corridor:
      build_corridor(scene, lattice_rng);
      break;
    case ScenePreset::Dynamic:
      build_dynamic(scene, lattice_rng);
      break;
  }
  if (scene.dynamic_motion.empty()) {
    scene.dynamic_motion.assign(config.frames, Sim3Pose());
  }
  scene.diameter = cloud_diameter(scene);
  return scene;
}

OracleResult oracle_render_full(const SyntheticScene& scene,
                                const std::vector<uint64_t>& frame_ids) {
  if (frame_ids.empty()) {
    fail(ErrorCode::EmptyBatch, "oracle_render: no frames requested");
  }
  if (static_cast<int>(frame_ids.size()) > InferenceBatch::kMaxFrames) {
    fail(ErrorCode::BatchTooLarge, "oracle_render: more than 16 frames");
  }
  for (uint64_t id : frame_ids) {
    if (id >= scene.trajectory.size()) {
      fail(ErrorCode::ProviderError, "oracle_render: frame id out of range");
    }
  }

  const SceneConfig& cfg = scene.config;
  const Intrinsics& intr = scene.intrinsics;
  const int w = cfg.width, h = cfg.height;
  const double sigma_x = scene.sigma_x();
  const double sigma_d = cfg.noise.descriptor;
  const double sigma_t = cfg.noise.pose;

  // All randomness derives from a hash chained over (seed, frame ids), so a
  // given batch composition renders identically on every call.
  uint64_t chain = cfg.seed;
  for (uint64_t id : frame_ids) {
    chain = fork_seed(chain, id + 1);
  }
  RngStream jitter_rng(fork_seed(chain, 1));
  const double lambda = cfg.noise.scale_log > 0.0
                            ? std::exp(cfg.noise.scale_log * jitter_rng.normal())
                            : 1.0;

  OracleResult out;
  out.batch.metric_scale = 1.0;
  out.batch.frames.reserve(frame_ids.size());
  out.images.reserve(frame_ids.size());
  out.gt.reserve(frame_ids.size());

  for (size_t k = 0; k < frame_ids.size(); ++k) {
    const uint64_t id = frame_ids[k];
    const Sim3Pose& gt_pose = scene.trajectory[id];
    const Sim3Pose world_to_cam = gt_pose.inverse();

    Grid<double> zbuf(w, h, std::numeric_limits<double>::infinity());
    Grid<int64_t> winner(w, h, -1);
    Grid<uint8_t> win_dyn(w, h, 0);
    Grid<double> win_z(w, h, 0.0);
    Grid<double> win_d2(w, h, std::numeric_limits<double>::infinity());

    // Pixel assignment runs in two passes. The first records the nearest
    // surface depth per pixel; the second picks, among candidates of the
    // front surface layer (depth within kLayerTol of the nearest), the point
    // whose projection lands closest to the pixel center. A plain min-depth
    // winner would systematically favor the camera-near side of a slanted
    // surface, planting a directional bias in every observation that the
    // downstream pose fit then absorbs; nearest-to-center keeps the pixel
    // quantization error symmetric. The tolerance still separates genuinely
    // distinct layers: the occluding band sits at 2.9% relative depth in
    // front of the wall it covers, outside the 2% grouping band.
    struct PixelCandidate {
      double z, d2;
      int64_t index;
      int u, v;
      uint8_t dyn;
    };
    std::vector<PixelCandidate> cands;
    cands.reserve(scene.static_points.size() + scene.dynamic_points.size());

    auto splat = [&](const Vec3& world_pos, int64_t index, uint8_t is_dyn) {
      const Vec3 local = world_to_cam.apply(world_pos);
      if (local.z() <= 1e-9) return;
      const Vec2 px = project(intr, local);
      const int u = static_cast<int>(std::lround(px.x()));
      const int v = static_cast<int>(std::lround(px.y()));
      if (u < 0 || u >= w || v < 0 || v >= h) return;
      cands.push_back(
          {local.z(), (px - Vec2(u, v)).squaredNorm(), index, u, v, is_dyn});
      if (local.z() < zbuf.at(u, v)) zbuf.at(u, v) = local.z();
    };

    for (size_t i = 0; i < scene.static_points.size(); ++i) {
      splat(scene.static_points[i].position, static_cast<int64_t>(i), 0);
    }
    const Sim3Pose& motion = scene.dynamic_motion[id];
    for (size_t i = 0; i < scene.dynamic_points.size(); ++i) {
      splat(motion.apply(scene.dynamic_points[i].position),
            static_cast<int64_t>(i), 1);
    }

    for (const PixelCandidate& c : cands) {
      if (c.z > zbuf.at(c.u, c.v) * (1.0 + kLayerTol)) continue;
      // Strict < keeps the first-seen candidate on exact ties, so the
      // static-then-dynamic, index-ordered traversal stays deterministic.
      if (c.d2 >= win_d2.at(c.u, c.v)) continue;
      win_d2.at(c.u, c.v) = c.d2;
      winner.at(c.u, c.v) = c.index;
      win_dyn.at(c.u, c.v) = c.dyn;
      win_z.at(c.u, c.v) = c.z;
    }

    RngStream point_rng(fork_seed(chain, 1000 + 3 * k));
    RngStream desc_rng(fork_seed(chain, 1000 + 3 * k + 1));
    RngStream pose_rng(fork_seed(chain, 1000 + 3 * k + 2));

    FrameObservation obs;
    obs.frame_id = id;
    obs.metric_scale = 1.0;
    obs.desc_dim = cfg.desc_dim;
    obs.X = Grid<Vec3>(w, h, Vec3::Zero());
    obs.C = Grid<float>(w, h, 0.0f);
    obs.D.assign(static_cast<size_t>(w) * h * cfg.desc_dim, 0.0f);
    obs.Q = Grid<float>(w, h, 0.0f);
    obs.valid = Grid<uint8_t>(w, h, 0);

    ImageRgb image(w, h, Eigen::Vector3f::Zero());
    GtFrame gt;
    gt.pose = gt_pose;
    gt.dynamic = Grid<uint8_t>(w, h, 0);
    gt.world = Grid<Vec3>(w, h, Vec3::Zero());
    gt.local = Grid<Vec3>(w, h, Vec3::Zero());

    const float conf = static_cast<float>(1.0 / (1.0 + sigma_x));
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const int64_t idx = winner.at(u, v);
        if (idx < 0) continue;
        const ScenePoint& pt = win_dyn.at(u, v)
                                   ? scene.dynamic_points[idx]
                                   : scene.static_points[idx];

        // Observed point: the winner's depth re-emitted along the exact pixel
        // ray, so project(K, X) reproduces (u, v) to machine precision.
        Vec3 x = backproject(intr, Vec2(u, v), win_z.at(u, v));
        if (sigma_x > 0.0) {
          const Vec3 noise(sigma_x * point_rng.normal(),
                           sigma_x * point_rng.normal(),
                           sigma_x * point_rng.normal());
          x.x() += noise.x();
          x.y() += noise.y();
          x.z() = x.z() + noise.z() > 0.0 ? x.z() + noise.z()
                                          : x.z() - noise.z();
        }
        obs.X.at(u, v) = x;

        float* d = obs.desc(u, v);
        if (sigma_d > 0.0) {
          Eigen::VectorXf noisy = pt.descriptor;
          for (int c = 0; c < cfg.desc_dim; ++c) {
            noisy[c] += static_cast<float>(sigma_d * desc_rng.normal());
          }
          noisy.normalize();
          std::copy(noisy.data(), noisy.data() + cfg.desc_dim, d);
        } else {
          std::copy(pt.descriptor.data(), pt.descriptor.data() + cfg.desc_dim,
                    d);
        }

        obs.C.at(u, v) = conf;
        obs.Q.at(u, v) = 1.0f;
        obs.valid.at(u, v) = 1;
        image.at(u, v) = pt.color;
        const Vec3 world_pos =
            win_dyn.at(u, v) ? motion.apply(pt.position) : pt.position;
        gt.dynamic.at(u, v) = win_dyn.at(u, v);
        gt.world.at(u, v) = world_pos;
        gt.local.at(u, v) = world_to_cam.apply(world_pos);
      }
    }

    Sim3Pose reported = gt_pose;
    if (sigma_t > 0.0) {
      Vec7 tau;
      const double rho_scale = sigma_t * scene.diameter;
      tau << rho_scale * pose_rng.normal(), rho_scale * pose_rng.normal(),
          rho_scale * pose_rng.normal(), sigma_t * pose_rng.normal(),
          sigma_t * pose_rng.normal(), sigma_t * pose_rng.normal(), 0.0;
      reported = Sim3Pose::exp(tau) * gt_pose;
    }
    if (lambda != 1.0) {
      for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
          obs.X.at(u, v) *= lambda;
        }
      }
      reported = Sim3Pose(reported.scale(), reported.rotation(),
                          lambda * reported.translation());
    }
    obs.set_pose(reported);

    out.batch.frames.push_back(std::move(obs));
    out.images.push_back(std::move(image));
    out.gt.push_back(std::move(gt));
  }
  return out;
}

InferenceBatch oracle_render(const SyntheticScene& scene,
                             const std::vector<uint64_t>& frame_ids) {
  return oracle_render_full(scene, frame_ids).batch;
}

}  // namespace m3
