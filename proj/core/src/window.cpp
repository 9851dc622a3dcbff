#include "m3/window/window.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <vector>

namespace m3 {

namespace {

void check_config(const WindowConfig& cfg) {
  if (cfg.max_historical < 1 || cfg.max_historical >= cfg.window_length) {
    fail(ErrorCode::ConfigError,
         "window needs 1 <= max_historical < window_length");
  }
  if (cfg.displacement_percentile < 1 || cfg.displacement_percentile > 100) {
    fail(ErrorCode::ConfigError, "displacement percentile outside [1, 100]");
  }
}

double keyframe_threshold(const WindowConfig& cfg, int width) {
  const double tau = cfg.keyframe_threshold > 0.0
                         ? cfg.keyframe_threshold
                         : std::max(0.333 * width, 30.0);
  if (tau <= 0.0) fail(ErrorCode::ConfigError, "keyframe threshold <= 0");
  return tau;
}

double mapper_threshold(const WindowConfig& cfg, int width) {
  const double tau =
      cfg.mapper_threshold > 0.0 ? cfg.mapper_threshold : 0.05 * width;
  if (tau <= 0.0) fail(ErrorCode::ConfigError, "mapper threshold <= 0");
  return tau;
}

}  // namespace

const char* frame_class_name(FrameClass cls) {
  switch (cls) {
    case FrameClass::Keyframe:
      return "keyframe";
    case FrameClass::MapperFrame:
      return "mapper";
    case FrameClass::CommonFrame:
      return "common";
  }
  return "?";
}

FrameClass classify_frame(const FrameObservation& frame,
                          const KeyframeNode& last_kf,
                          const CorrespondenceSet& matches,
                          const WindowConfig& cfg, ClassifyStats* stats) {
  (void)last_kf;  // the decision reads only the precomputed matches
  check_config(cfg);
  const int width = frame.X.width();
  const double tau_k = keyframe_threshold(cfg, width);
  const double tau_m = mapper_threshold(cfg, width);

  const size_t count = matches.pairs.size();
  const size_t valid = matches.stats.source_valid;

  ClassifyStats s;
  s.match_count = count;
  s.match_fraction = valid > 0 ? double(count) / double(valid) : 0.0;
  if (!matches.pairs.empty()) {
    std::vector<double> disp;
    disp.reserve(count);
    for (const Correspondence& c : matches.pairs) {
      disp.push_back(std::hypot(double(c.pu) - c.qu, double(c.pv) - c.qv));
    }
    // Nearest-rank percentile: smallest value covering the requested share.
    const size_t idx = static_cast<size_t>(std::ceil(
                           cfg.displacement_percentile / 100.0 * count)) -
                       1;
    std::nth_element(disp.begin(), disp.begin() + idx, disp.end());
    s.p_displacement = disp[idx];
  }
  if (stats) *stats = s;

  const bool keyframe =
      valid == 0 || (cfg.fraction_mode
                         ? s.match_fraction < 1.0 / 3.0
                         : double(count) < tau_k * double(valid) / width);
  if (keyframe) return FrameClass::Keyframe;
  return s.p_displacement > tau_m ? FrameClass::MapperFrame
                                  : FrameClass::CommonFrame;
}

SlidingWindow::SlidingWindow(WindowConfig cfg) : cfg_(cfg) {
  check_config(cfg_);
}

BatchPlan SlidingWindow::assemble_batch(
    const KeyframeGraph& graph, const std::vector<uint64_t>& new_frames) const {
  if (new_frames.empty()) {
    fail(ErrorCode::EmptyInput, "assemble_batch: no new frames");
  }
  if (static_cast<int>(new_frames.size()) > cfg_.window_length - 1) {
    fail(ErrorCode::ConfigError,
         "assemble_batch: more new frames than the window can hold");
  }

  BatchPlan plan;
  if (graph.size() > 0) {
    const int last = graph.size() - 1;
    const int k_slots =
        std::min({graph.size(), cfg_.max_historical,
                  cfg_.window_length - static_cast<int>(new_frames.size())});
    plan.historical.push_back(last);
    if (k_slots > 1) {
      const std::vector<int> top = graph.retrieve_candidates(
          graph.node(last).global_desc, k_slots - 1, 1);
      plan.historical.insert(plan.historical.end(), top.begin(), top.end());
    }
    const uint64_t newest = graph.node(last).frame_id;
    for (int id : plan.historical) {
      const uint64_t fid = graph.node(id).frame_id;
      plan.frame_ids.push_back(fid);
      if (newest - fid > cfg_.loop_gap) {
        plan.loop_trigger = true;
        plan.loop_candidates.push_back(id);
      }
    }
  }
  plan.frame_ids.insert(plan.frame_ids.end(), new_frames.begin(),
                        new_frames.end());
  return plan;
}

void SlidingWindow::advance(KeyframeGraph& graph,
                            std::vector<ProcessedFrame> batch) {
  for (ProcessedFrame& f : batch) {
    WindowRecord rec;
    rec.frame_id = f.obs.frame_id;
    rec.cls = f.cls;
    rec.pose = f.pose;
    rec.stats = f.stats;
    records_.push_back(rec);
    if (f.cls == FrameClass::Keyframe) {
      graph.add_keyframe(f.obs, f.pose, f.motion.empty() ? nullptr : &f.motion);
    }
  }
}

void SlidingWindow::write_log(std::ostream& out) const {
  out << "frame_id,class,match_count,match_fraction,p70_displacement\n";
  char line[160];
  for (const WindowRecord& r : records_) {
    std::snprintf(line, sizeof(line), "%llu,%s,%zu,%.6f,%.6f\n",
                  static_cast<unsigned long long>(r.frame_id),
                  frame_class_name(r.cls), r.stats.match_count,
                  r.stats.match_fraction, r.stats.p_displacement);
    out << line;
  }
}

}  // namespace m3
