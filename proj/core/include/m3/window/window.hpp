#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "m3/backend/graph.hpp"

namespace m3 {

struct WindowConfig {
  int window_length = 8;   // batch capacity, historical slots included
  int max_historical = 4;  // cap on historical keyframe slots
  // Keyframe threshold: a frame becomes a keyframe when its per-row
  // normalized match count against the latest keyframe falls below this.
  // Non-positive derives max(0.333 * W, 30) from the frame width.
  double keyframe_threshold = -1.0;
  // Mapper threshold: past the keyframe check, a frame becomes a mapper
  // frame when the displacement percentile below exceeds this many pixels.
  // Non-positive derives 0.05 * W.
  double mapper_threshold = -1.0;
  int displacement_percentile = 70;
  // Alternative keyframe rule: promote when matches / valid source pixels
  // drops below 1/3 (the count rule and this reproduce the same "overlap
  // lost ~2/3" intent; the count rule is the default).
  bool fraction_mode = false;
  uint64_t loop_gap = 50;  // frame-id gap that flags a retrieval as a loop
};

enum class FrameClass { Keyframe, MapperFrame, CommonFrame };

// Lowercase token used in logs: "keyframe", "mapper", "common".
const char* frame_class_name(FrameClass cls);

struct ClassifyStats {
  size_t match_count = 0;
  double match_fraction = 0.0;     // matches / valid source pixels
  double p_displacement = 0.0;     // displacement percentile, pixels
};

// Slot assignment for one inference batch.
struct BatchPlan {
  std::vector<uint64_t> frame_ids;  // historical keyframes, then new frames
  std::vector<int> historical;      // graph node ids occupying the slots
  bool loop_trigger = false;
  std::vector<int> loop_candidates;  // retrieved nodes beyond the loop gap
};

// A frame that finished tracking and classification and is ready to be
// folded into the window state.
struct ProcessedFrame {
  FrameObservation obs;
  Sim3Pose pose;  // world-from-camera
  FrameClass cls = FrameClass::CommonFrame;
  Grid<float> motion;  // empty means all-static
  ClassifyStats stats;
};

struct WindowRecord {
  uint64_t frame_id = 0;
  FrameClass cls = FrameClass::CommonFrame;
  Sim3Pose pose;
  ClassifyStats stats;
};

// Classify a frame against the latest keyframe from their guided matches:
// Keyframe when the (width-normalized) match count collapses, else
// MapperFrame when the displacement percentile exceeds the mapper
// threshold, else CommonFrame. A frame with no valid source overlap is
// always a Keyframe. `stats` (optional) receives the quantities the
// decision used. Errors: ConfigError.
FrameClass classify_frame(const FrameObservation& frame,
                          const KeyframeNode& last_kf,
                          const CorrespondenceSet& matches,
                          const WindowConfig& cfg,
                          ClassifyStats* stats = nullptr);

// Batch-by-batch window state: plans inference batches around the keyframe
// graph and keeps one record per processed frame (the classification log).
class SlidingWindow {
 public:
  explicit SlidingWindow(WindowConfig cfg = {});

  const WindowConfig& config() const { return cfg_; }

  // Slots for the next batch: the latest keyframe, up to K-1 retrieval
  // results ranked by the latest keyframe's global descriptor, then the new
  // frames, where K = min(keyframe count, max_historical, capacity left by
  // the new frames). Retrievals whose frame id lags the latest keyframe by
  // more than loop_gap set the loop trigger. With an empty graph the batch
  // is the new frames alone. Errors: EmptyInput (no new frames),
  // ConfigError (more than window_length - 1 new frames).
  BatchPlan assemble_batch(const KeyframeGraph& graph,
                           const std::vector<uint64_t>& new_frames) const;

  // Fold a processed batch into the state: frames classified Keyframe are
  // registered into the graph (in batch order, growing sequential edges);
  // every frame appends one record.
  void advance(KeyframeGraph& graph, std::vector<ProcessedFrame> batch);

  const std::vector<WindowRecord>& records() const { return records_; }

  // CSV: frame_id,class,match_count,match_fraction,p70_displacement
  void write_log(std::ostream& out) const;

 private:
  WindowConfig cfg_;
  std::vector<WindowRecord> records_;
};

}  // namespace m3
