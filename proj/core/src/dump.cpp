#include "m3/prior/dump.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "m3/common/error.hpp"

namespace m3 {
namespace {

// The format is little-endian; this code writes native byte order.
static_assert(std::endian::native == std::endian::little,
              "dump serialization assumes a little-endian host");

constexpr char kMagic[4] = {'M', '3', 'P', 'D'};
constexpr char kGtMagic[4] = {'G', 'T', '0', '0'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void write_array(std::ofstream& out, const T* data, size_t count) {
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(count * sizeof(T)));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) fail(ErrorCode::TruncatedFile, "dump ended mid-record");
  return value;
}

template <typename T>
void read_array(std::ifstream& in, T* data, size_t count) {
  in.read(reinterpret_cast<char*>(data),
          static_cast<std::streamsize>(count * sizeof(T)));
  if (!in) fail(ErrorCode::TruncatedFile, "dump ended mid-array");
}

void write_pose(std::ofstream& out, const Mat4& m) {
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      write_pod(out, m(r, c));
    }
  }
}

Mat4 read_pose(std::ifstream& in) {
  Mat4 m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      m(r, c) = read_pod<double>(in);
    }
  }
  return m;
}

}  // namespace

void save_dump(const std::string& path, const InferenceBatch& batch,
               const DumpGroundTruth* ground_truth) {
  if (batch.frames.empty()) {
    fail(ErrorCode::EmptyBatch, "save_dump: batch has no frames");
  }
  const FrameObservation& first = batch.frames.front();
  const uint32_t h = first.height(), w = first.width();
  const uint32_t d = static_cast<uint32_t>(first.desc_dim);
  for (const FrameObservation& f : batch.frames) {
    if (static_cast<uint32_t>(f.height()) != h ||
        static_cast<uint32_t>(f.width()) != w ||
        static_cast<uint32_t>(f.desc_dim) != d) {
      fail(ErrorCode::DimensionMismatch, "save_dump: frames disagree on dims");
    }
  }
  if (ground_truth &&
      (ground_truth->poses.size() != batch.frames.size() ||
       ground_truth->dynamic.size() != batch.frames.size())) {
    fail(ErrorCode::DimensionMismatch,
         "save_dump: ground truth count != frame count");
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::TruncatedFile, "save_dump: cannot open " + path);

  out.write(kMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, static_cast<uint32_t>(batch.frames.size()));
  write_pod(out, h);
  write_pod(out, w);
  write_pod(out, d);

  const size_t npx = static_cast<size_t>(h) * w;
  std::vector<float> xbuf(npx * 3);
  for (const FrameObservation& f : batch.frames) {
    write_pod(out, f.frame_id);
    write_pose(out, f.pose_raw);
    write_pod(out, f.metric_scale);
    for (size_t i = 0; i < npx; ++i) {
      xbuf[3 * i + 0] = static_cast<float>(f.X.raw()[i].x());
      xbuf[3 * i + 1] = static_cast<float>(f.X.raw()[i].y());
      xbuf[3 * i + 2] = static_cast<float>(f.X.raw()[i].z());
    }
    write_array(out, xbuf.data(), xbuf.size());
    write_array(out, f.C.raw().data(), npx);
    write_array(out, f.D.data(), npx * d);
    write_array(out, f.Q.raw().data(), npx);
    write_array(out, f.valid.raw().data(), npx);
  }

  if (ground_truth) {
    out.write(kGtMagic, 4);
    for (size_t k = 0; k < batch.frames.size(); ++k) {
      if (ground_truth->dynamic[k].width() != static_cast<int>(w) ||
          ground_truth->dynamic[k].height() != static_cast<int>(h)) {
        fail(ErrorCode::DimensionMismatch, "save_dump: bad gt mask shape");
      }
      write_pose(out, ground_truth->poses[k]);
      write_array(out, ground_truth->dynamic[k].raw().data(), npx);
    }
  }
  out.flush();
  if (!out) fail(ErrorCode::TruncatedFile, "save_dump: write failed");
}

LoadResult load_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::TruncatedFile, "load_dump: cannot open " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    fail(ErrorCode::BadMagic, "load_dump: not an M3PD file");
  }
  const uint32_t version = read_pod<uint32_t>(in);
  if (version != kVersion) {
    fail(ErrorCode::VersionMismatch,
         "load_dump: unsupported version " + std::to_string(version));
  }
  const uint32_t n = read_pod<uint32_t>(in);
  const uint32_t h = read_pod<uint32_t>(in);
  const uint32_t w = read_pod<uint32_t>(in);
  const uint32_t d = read_pod<uint32_t>(in);
  if (n == 0) fail(ErrorCode::EmptyBatch, "load_dump: zero frames");
  if (n > static_cast<uint32_t>(InferenceBatch::kMaxFrames)) {
    fail(ErrorCode::BatchTooLarge, "load_dump: more than 16 frames");
  }
  if (h == 0 || w == 0 || d == 0 || h > 1 << 16 || w > 1 << 16 || d > 4096) {
    fail(ErrorCode::DimensionMismatch, "load_dump: implausible dimensions");
  }

  LoadResult result;
  result.batch.frames.reserve(n);
  const size_t npx = static_cast<size_t>(h) * w;
  std::vector<float> xbuf(npx * 3);

  for (uint32_t k = 0; k < n; ++k) {
    FrameObservation f;
    f.frame_id = read_pod<uint64_t>(in);
    f.set_pose_raw(read_pose(in));
    f.metric_scale = read_pod<double>(in);
    f.desc_dim = static_cast<int>(d);
    f.X = Grid<Vec3>(w, h, Vec3::Zero());
    f.C = Grid<float>(w, h, 0.0f);
    f.D.resize(npx * d);
    f.Q = Grid<float>(w, h, 0.0f);
    f.valid = Grid<uint8_t>(w, h, 0);

    read_array(in, xbuf.data(), xbuf.size());
    for (size_t i = 0; i < npx; ++i) {
      f.X.raw()[i] = Vec3(xbuf[3 * i + 0], xbuf[3 * i + 1], xbuf[3 * i + 2]);
    }
    read_array(in, f.C.raw().data(), npx);
    read_array(in, f.D.data(), npx * d);
    read_array(in, f.Q.raw().data(), npx);
    read_array(in, f.valid.raw().data(), npx);

    // Guard against drift introduced by external producers: descriptors are
    // unit-norm by contract, so anything off by >1e-3 is renormalized and
    // counted for the caller to report.
    for (size_t i = 0; i < npx; ++i) {
      if (!f.valid.raw()[i]) continue;
      float* desc = f.D.data() + i * d;
      double norm2 = 0.0;
      for (uint32_t c = 0; c < d; ++c) norm2 += double(desc[c]) * desc[c];
      const double norm = std::sqrt(norm2);
      if (std::abs(norm - 1.0) > 1e-3) {
        ++result.renormalized_descriptors;
        if (norm > 0.0) {
          for (uint32_t c = 0; c < d; ++c) {
            desc[c] = static_cast<float>(desc[c] / norm);
          }
        }
      }
    }
    result.batch.metric_scale = f.metric_scale;
    result.batch.frames.push_back(std::move(f));
  }

  char gt_magic[4];
  in.read(gt_magic, 4);
  if (in && std::memcmp(gt_magic, kGtMagic, 4) == 0) {
    result.has_ground_truth = true;
    result.ground_truth.poses.reserve(n);
    result.ground_truth.dynamic.reserve(n);
    for (uint32_t k = 0; k < n; ++k) {
      result.ground_truth.poses.push_back(read_pose(in));
      Grid<uint8_t> mask(w, h, 0);
      read_array(in, mask.raw().data(), npx);
      result.ground_truth.dynamic.push_back(std::move(mask));
    }
  }
  return result;
}

}  // namespace m3
