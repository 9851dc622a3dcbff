#pragma once

#include <string>
#include <vector>

#include "m3/prior/observation.hpp"

namespace m3 {

// Optional ground-truth sidecar carried in a dump trailer: exact
// camera-to-world poses and per-pixel dynamic masks, nothing else.
struct DumpGroundTruth {
  std::vector<Mat4> poses;
  std::vector<Grid<uint8_t>> dynamic;
};

struct LoadResult {
  InferenceBatch batch;
  // Valid pixels whose stored descriptor norm was off by more than 1e-3 and
  // was renormalized on load (callers should treat nonzero as a warning).
  int renormalized_descriptors = 0;
  bool has_ground_truth = false;
  DumpGroundTruth ground_truth;
};

// Binary batch dump, little-endian throughout:
//   magic "M3PD", u32 version (=1), u32 frame count, u32 H, u32 W, u32 d;
//   per frame: u64 frame id, 16 f64 camera-to-world pose (row-major),
//              f64 metric scale, X (H*W*3 f32), C (H*W f32), D (H*W*d f32),
//              Q (H*W f32), valid (H*W u8);
//   optional trailer: magic "GT00", then per frame 16 f64 ground-truth pose
//              and H*W u8 dynamic mask.
// Point maps are quantized to f32 on write; everything else round-trips
// bitwise.
void save_dump(const std::string& path, const InferenceBatch& batch,
               const DumpGroundTruth* ground_truth = nullptr);

LoadResult load_dump(const std::string& path);

}  // namespace m3
