#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "m3/prior/scene.hpp"

namespace m3 {

// One inference pass as consumed by the pipeline: the geometric batch, the
// captured images, and (when the source knows it) evaluation-only ground
// truth. Ground truth never feeds back into estimation.
struct ProviderOutput {
  InferenceBatch batch;
  std::vector<ImageRgb> images;
  bool has_ground_truth = false;
  std::vector<Mat4> gt_poses;
  std::vector<Grid<uint8_t>> gt_dynamic;
};

// Source of inference batches. Implementations must return frames in the
// requested order with matching ids, and must be deterministic: the same
// id list always yields the same bytes.
class PriorProvider {
 public:
  virtual ~PriorProvider() = default;
  virtual ProviderOutput infer(const std::vector<uint64_t>& frame_ids) = 0;
  virtual uint64_t frame_count() const = 0;
};

// Renders batches from a synthetic scene on demand.
class OracleProvider : public PriorProvider {
 public:
  explicit OracleProvider(SyntheticScene scene) : scene_(std::move(scene)) {}

  ProviderOutput infer(const std::vector<uint64_t>& frame_ids) override;
  uint64_t frame_count() const override { return scene_.trajectory.size(); }

  const SyntheticScene& scene() const { return scene_; }

 private:
  SyntheticScene scene_;
};

// Replays batches recorded by `m3 gen-scene`: a manifest (manifest.json)
// mapping frame-id lists to dump files, plus per-frame PNG images. Requests
// must match a recorded batch exactly — the recorder and the replaying run
// assemble batches with the same logic, so any mismatch means the two runs
// diverged and is reported as ProviderError.
class DumpProvider : public PriorProvider {
 public:
  explicit DumpProvider(const std::string& directory);

  ProviderOutput infer(const std::vector<uint64_t>& frame_ids) override;
  uint64_t frame_count() const override { return frame_count_; }

 private:
  std::string directory_;
  uint64_t frame_count_ = 0;
  std::map<std::vector<uint64_t>, std::string> batch_files_;
};

}  // namespace m3
