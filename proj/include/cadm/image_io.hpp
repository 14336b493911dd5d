#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cadm {

// 8-bit image in channel-interleaved row-major order (HWC); channels is 1
// (grayscale) or 3 (RGB).
struct ImageU8 {
  int channels = 0, height = 0, width = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

// Reads a PNG; palette/gray expand to the nearest of gray/RGB, alpha is
// stripped, 16-bit depth is reduced to 8.
ImageU8 read_png(const std::string& path);
void write_png(const std::string& path, const ImageU8& img);

}  // namespace cadm
