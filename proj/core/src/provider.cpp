#include "m3/prior/provider.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "m3/common/error.hpp"
#include "m3/prior/dump.hpp"

namespace m3 {

ProviderOutput OracleProvider::infer(const std::vector<uint64_t>& frame_ids) {
  OracleResult rendered = oracle_render_full(scene_, frame_ids);
  ProviderOutput out;
  out.batch = std::move(rendered.batch);
  out.images = std::move(rendered.images);
  out.has_ground_truth = true;
  out.gt_poses.reserve(rendered.gt.size());
  out.gt_dynamic.reserve(rendered.gt.size());
  for (GtFrame& g : rendered.gt) {
    out.gt_poses.push_back(g.pose.matrix());
    out.gt_dynamic.push_back(std::move(g.dynamic));
  }
  return out;
}

DumpProvider::DumpProvider(const std::string& directory)
    : directory_(directory) {
  std::ifstream in(directory + "/manifest.json");
  if (!in) {
    fail(ErrorCode::ProviderError,
         "dump provider: cannot open " + directory + "/manifest.json");
  }
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ProviderError,
         std::string("dump provider: bad manifest: ") + e.what());
  }
  if (!manifest.contains("frame_count") || !manifest.contains("batches")) {
    fail(ErrorCode::ProviderError, "dump provider: manifest missing fields");
  }
  frame_count_ = manifest["frame_count"].get<uint64_t>();
  for (const auto& entry : manifest["batches"]) {
    batch_files_[entry["frames"].get<std::vector<uint64_t>>()] =
        entry["file"].get<std::string>();
  }
}

ProviderOutput DumpProvider::infer(const std::vector<uint64_t>& frame_ids) {
  auto it = batch_files_.find(frame_ids);
  if (it == batch_files_.end()) {
    std::ostringstream ids;
    for (uint64_t id : frame_ids) ids << ' ' << id;
    fail(ErrorCode::ProviderError,
         "dump provider: no recorded batch for frames" + ids.str());
  }
  LoadResult loaded = load_dump(directory_ + "/" + it->second);
  if (loaded.batch.frames.size() != frame_ids.size()) {
    fail(ErrorCode::ProviderError, "dump provider: frame count mismatch");
  }
  for (size_t k = 0; k < frame_ids.size(); ++k) {
    if (loaded.batch.frames[k].frame_id != frame_ids[k]) {
      fail(ErrorCode::ProviderError, "dump provider: frame id mismatch");
    }
  }

  ProviderOutput out;
  out.batch = std::move(loaded.batch);
  out.images.reserve(frame_ids.size());
  for (uint64_t id : frame_ids) {
    char name[64];
    std::snprintf(name, sizeof(name), "/images/frame_%06" PRIu64 ".png", id);
    out.images.push_back(read_png(directory_ + name));
  }
  if (loaded.has_ground_truth) {
    out.has_ground_truth = true;
    out.gt_poses = std::move(loaded.ground_truth.poses);
    out.gt_dynamic = std::move(loaded.ground_truth.dynamic);
  }
  return out;
}

}  // namespace m3
