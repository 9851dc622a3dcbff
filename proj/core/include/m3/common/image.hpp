#pragma once

#include <string>

#include <Eigen/Core>

#include "m3/common/grid.hpp"

namespace m3 {

// RGB raster with channels in [0, 1]. Values produced by the renderer and by
// PNG loading always sit on the u8 lattice (k / 255), so writing and
// re-reading a PNG reproduces the image bitwise.
using ImageRgb = Grid<Eigen::Vector3f>;

inline float luminance(const Eigen::Vector3f& rgb) {
  return 0.299f * rgb.x() + 0.587f * rgb.y() + 0.114f * rgb.z();
}

// 8-bit RGB PNG I/O.
void write_png(const std::string& path, const ImageRgb& image);
ImageRgb read_png(const std::string& path);

}  // namespace m3
