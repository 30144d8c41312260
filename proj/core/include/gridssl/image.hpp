#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gridssl/ratemap.hpp"
#include "gridssl/tensor.hpp"

namespace gridssl {

struct RgbImage {
  std::size_t w = 0, h = 0;
  std::vector<unsigned char> px;  // 3 bytes per pixel, row-major

  unsigned char* at(std::size_t x, std::size_t y) {
    return px.data() + 3 * (y * w + x);
  }
};

// Binary graymap, values mapped linearly from [lo, hi] to [0, 255];
// NaN renders black.
void write_pgm(const std::string& path, const Tensor<double>& grid, double lo,
               double hi);

// Binary pixmap.
void write_ppm(const std::string& path, const RgbImage& img);

// One tile per ratemap: rate in grayscale, unvisited bins dark blue,
// dead units washed red.
RgbImage render_ratemap(const Ratemap& map);

// Tiles arranged left-to-right, top-to-bottom on a dark background.
RgbImage montage(const std::vector<RgbImage>& tiles, std::size_t cols,
                 std::size_t pad = 2);

}  // namespace gridssl
