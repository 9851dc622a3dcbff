#include "m3/matching/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "m3/common/error.hpp"

namespace m3 {
namespace {

double desc_dot(const float* a, const float* b, int dim) {
  double s = 0.0;
  for (int c = 0; c < dim; ++c) s += double(a[c]) * b[c];
  return s;
}

}  // namespace

CorrespondenceSet coarse_to_fine_match(const FrameObservation& src,
                                       const FrameObservation& tgt,
                                       const Sim3Pose& pose_src,
                                       const Sim3Pose& pose_tgt,
                                       const Intrinsics& intr,
                                       const MatchConfig& cfg) {
  if (src.desc_dim != tgt.desc_dim) {
    fail(ErrorCode::DimensionMismatch, "match: descriptor dims differ");
  }
  const int w = tgt.width(), h = tgt.height();
  const int r = cfg.radius;
  const Sim3Pose t_rel = pose_tgt.inverse() * pose_src;

  CorrespondenceSet out;
  out.source_id = src.frame_id;
  out.target_id = tgt.frame_id;

  for (int qv = 0; qv < src.height(); ++qv) {
    for (int qu = 0; qu < src.width(); ++qu) {
      if (!src.valid.at(qu, qv)) continue;
      ++out.stats.source_valid;

      const Vec3 y = t_rel.apply(src.X.at(qu, qv));
      if (y.z() <= 1e-9) {
        ++out.stats.dropped_behind_camera;
        continue;
      }
      const Vec2 px = project(intr, y);
      const int cu = static_cast<int>(std::lround(px.x()));
      const int cv = static_cast<int>(std::lround(px.y()));
      if (cu < -r || cu > w - 1 + r || cv < -r || cv > h - 1 + r) {
        ++out.stats.dropped_outside_image;
        continue;
      }

      const float* qd = src.desc(qu, qv);
      double best_sim = -2.0;
      double best_dist2 = 0.0;
      int best_u = -1, best_v = -1;
      for (int tv = std::max(0, cv - r); tv <= std::min(h - 1, cv + r); ++tv) {
        for (int tu = std::max(0, cu - r); tu <= std::min(w - 1, cu + r);
             ++tu) {
          if (!tgt.valid.at(tu, tv)) continue;
          ++out.stats.candidates_evaluated;
          const double sim = desc_dot(qd, tgt.desc(tu, tv), src.desc_dim);
          if (sim < best_sim) continue;
          const double dist2 = (Vec2(tu, tv) - px).squaredNorm();
          if (sim > best_sim || dist2 < best_dist2 ||
              (dist2 == best_dist2 &&
               (tv < best_v || (tv == best_v && tu < best_u)))) {
            best_sim = sim;
            best_dist2 = dist2;
            best_u = tu;
            best_v = tv;
          }
        }
      }
      if (best_u < 0 || best_sim < cfg.min_similarity) {
        ++out.stats.dropped_low_similarity;
        continue;
      }
      out.pairs.push_back(Correspondence{
          qu, qv, best_u, best_v, best_sim,
          std::sqrt(double(src.Q.at(qu, qv)) * tgt.Q.at(best_u, best_v))});
    }
  }
  return out;
}

CorrespondenceSet mine_gt_correspondences(const GroundTruthView& ref,
                                          const GroundTruthView& other,
                                          double eps) {
  if (!ref.obs || !ref.local || ref.local->empty() ||
      !ref.local->same_shape(ref.obs->valid)) {
    fail(ErrorCode::MissingGroundTruth, "mine: reference lacks ground truth");
  }
  if (!other.obs || !other.local || other.local->empty() ||
      !other.local->same_shape(other.obs->valid)) {
    fail(ErrorCode::MissingGroundTruth, "mine: other frame lacks ground truth");
  }

  // Map the other frame's exact points into the reference camera frame and
  // hash them into eps-sized voxels for neighbour lookup.
  const Sim3Pose to_ref = ref.pose.inverse() * other.pose;
  struct Entry {
    Vec3 p;
    int u, v;
  };
  std::unordered_map<uint64_t, std::vector<Entry>> voxels;
  auto voxel_key = [eps](int64_t a, int64_t b, int64_t c) {
    uint64_t k = static_cast<uint64_t>(a) * 0x9E3779B97F4A7C15ULL;
    k ^= static_cast<uint64_t>(b) * 0xC2B2AE3D27D4EB4FULL;
    k ^= static_cast<uint64_t>(c) * 0x165667B19E3779F9ULL;
    return k;
  };
  auto cell_of = [eps](double x) {
    return static_cast<int64_t>(std::floor(x / eps));
  };
  for (int v = 0; v < other.local->height(); ++v) {
    for (int u = 0; u < other.local->width(); ++u) {
      if (!other.obs->valid.at(u, v)) continue;
      const Vec3 p = to_ref.apply(other.local->at(u, v));
      voxels[voxel_key(cell_of(p.x()), cell_of(p.y()), cell_of(p.z()))]
          .push_back(Entry{p, u, v});
    }
  }

  CorrespondenceSet out;
  out.source_id = ref.obs->frame_id;
  out.target_id = other.obs->frame_id;
  for (int qv = 0; qv < ref.local->height(); ++qv) {
    for (int qu = 0; qu < ref.local->width(); ++qu) {
      if (!ref.obs->valid.at(qu, qv)) continue;
      ++out.stats.source_valid;
      const Vec3& x = ref.local->at(qu, qv);

      double best_d = eps;
      int best_u = -1, best_v = -1;
      const int64_t cx = cell_of(x.x()), cy = cell_of(x.y()),
                    cz = cell_of(x.z());
      for (int64_t a = cx - 1; a <= cx + 1; ++a) {
        for (int64_t b = cy - 1; b <= cy + 1; ++b) {
          for (int64_t c = cz - 1; c <= cz + 1; ++c) {
            const auto it = voxels.find(voxel_key(a, b, c));
            if (it == voxels.end()) continue;
            for (const Entry& e : it->second) {
              ++out.stats.candidates_evaluated;
              const double d = (e.p - x).norm();
              if (d < best_d ||
                  (d == best_d && best_u >= 0 &&
                   (e.v < best_v || (e.v == best_v && e.u < best_u)))) {
                best_d = d;
                best_u = e.u;
                best_v = e.v;
              }
            }
          }
        }
      }
      if (best_u < 0) {
        ++out.stats.dropped_outside_image;
        continue;
      }
      out.pairs.push_back(Correspondence{
          qu, qv, best_u, best_v,
          desc_dot(ref.obs->desc(qu, qv), other.obs->desc(best_u, best_v),
                   ref.obs->desc_dim),
          std::sqrt(double(ref.obs->Q.at(qu, qv)) *
                    other.obs->Q.at(best_u, best_v))});
    }
  }
  return out;
}

}  // namespace m3
