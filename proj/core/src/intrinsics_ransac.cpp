#include "m3/prior/intrinsics_ransac.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "m3/common/error.hpp"
#include "m3/common/rng.hpp"

namespace m3 {
namespace {

constexpr int kMinValidPixels = 100;
constexpr double kUsableSlope = 1e-6;  // |lateral| must exceed this times z
constexpr double kInlierPx = 1.0;
constexpr int kCandidates = 50;

struct AxisSample {
  double offset;  // u - cx (or v - cy)
  double lateral; // x (or y)
  double z;
};

// One-dimensional RANSAC over per-pixel focal hypotheses f = z*offset/lateral.
double estimate_axis(const std::vector<AxisSample>& samples, RngStream& rng) {
  double best_f = 0.0;
  int best_inliers = -1;
  for (int c = 0; c < kCandidates; ++c) {
    const AxisSample& pick =
        samples[rng.uniform_int(0, static_cast<int>(samples.size()) - 1)];
    const double f = pick.z * pick.offset / pick.lateral;
    if (!std::isfinite(f) || f <= 0.0) continue;
    int inliers = 0;
    for (const AxisSample& s : samples) {
      if (std::abs(f * s.lateral / s.z - s.offset) <= kInlierPx) ++inliers;
    }
    if (inliers > best_inliers) {
      best_inliers = inliers;
      best_f = f;
    }
  }
  if (best_inliers <= 0) {
    fail(ErrorCode::DegenerateGeometry,
         "intrinsics ransac: no candidate produced inliers");
  }
  std::vector<double> estimates;
  estimates.reserve(samples.size());
  for (const AxisSample& s : samples) {
    if (std::abs(best_f * s.lateral / s.z - s.offset) <= kInlierPx) {
      estimates.push_back(s.z * s.offset / s.lateral);
    }
  }
  const size_t mid = estimates.size() / 2;
  std::nth_element(estimates.begin(), estimates.begin() + mid, estimates.end());
  return estimates[mid];
}

}  // namespace

Intrinsics estimate_intrinsics_ransac(const InferenceBatch& batch) {
  if (batch.frames.empty()) {
    fail(ErrorCode::EmptyBatch, "intrinsics ransac: empty batch");
  }
  const double cx = 0.5 * (batch.frames.front().width() - 1);
  const double cy = 0.5 * (batch.frames.front().height() - 1);

  std::vector<AxisSample> xs, ys;
  size_t valid_count = 0;
  for (const FrameObservation& f : batch.frames) {
    for (int v = 0; v < f.height(); ++v) {
      for (int u = 0; u < f.width(); ++u) {
        if (!f.valid.at(u, v)) continue;
        ++valid_count;
        const Vec3& p = f.X.at(u, v);
        if (p.z() <= 0.0) continue;
        if (std::abs(p.x()) > kUsableSlope * p.z()) {
          xs.push_back(AxisSample{u - cx, p.x(), p.z()});
        }
        if (std::abs(p.y()) > kUsableSlope * p.z()) {
          ys.push_back(AxisSample{v - cy, p.y(), p.z()});
        }
      }
    }
  }
  if (valid_count < kMinValidPixels) {
    fail(ErrorCode::DegenerateGeometry,
         "intrinsics ransac: fewer than 100 valid pixels");
  }
  if (2 * xs.size() < valid_count || 2 * ys.size() < valid_count) {
    fail(ErrorCode::DegenerateGeometry,
         "intrinsics ransac: lateral signal too weak on most pixels");
  }

  RngStream rng(fork_seed(0x1CA11B8A7E5ULL, valid_count));
  Intrinsics k;
  k.cx = cx;
  k.cy = cy;
  k.fx = estimate_axis(xs, rng);
  k.fy = estimate_axis(ys, rng);
  return k;
}

Intrinsics align_intrinsics(InferenceBatch& batch, const Intrinsics& k_ref) {
  const Intrinsics detected = estimate_intrinsics_ransac(batch);
  for (FrameObservation& f : batch.frames) {
    for (int v = 0; v < f.height(); ++v) {
      for (int u = 0; u < f.width(); ++u) {
        if (!f.valid.at(u, v)) continue;
        Vec3& p = f.X.at(u, v);
        const double z = p.z();  // preserved bitwise
        p = backproject(k_ref, Vec2(u, v), z);
      }
    }
  }
  return detected;
}

}  // namespace m3
