#include "gridssl/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gridssl/error.hpp"

namespace gridssl {

namespace {

unsigned char to_byte(double v, double lo, double hi) {
  if (std::isnan(v)) return 0;
  if (hi <= lo) return 0;
  const double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
  return static_cast<unsigned char>(std::lround(t * 255.0));
}

struct FileHandle {
  std::FILE* f;
  explicit FileHandle(const std::string& path) : f(std::fopen(path.c_str(), "wb")) {
    if (!f) throw IoError(path + ": cannot open for writing");
  }
  ~FileHandle() {
    if (f) std::fclose(f);
  }
};

}  // namespace

void write_pgm(const std::string& path, const Tensor<double>& grid, double lo,
               double hi) {
  const std::size_t rows = grid.shape.rows(), cols = grid.shape.dim(1);
  FileHandle fh(path);
  std::fprintf(fh.f, "P5\n%zu %zu\n255\n", cols, rows);
  std::vector<unsigned char> line(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c)
      line[c] = to_byte(grid.at(r, c), lo, hi);
    if (std::fwrite(line.data(), 1, cols, fh.f) != cols)
      throw IoError(path + ": short write");
  }
}

void write_ppm(const std::string& path, const RgbImage& img) {
  FileHandle fh(path);
  std::fprintf(fh.f, "P6\n%zu %zu\n255\n", img.w, img.h);
  if (std::fwrite(img.px.data(), 1, img.px.size(), fh.f) != img.px.size())
    throw IoError(path + ": short write");
}

RgbImage render_ratemap(const Ratemap& map) {
  RgbImage img;
  img.w = map.nx;
  img.h = map.ny;
  img.px.assign(3 * map.nx * map.ny, 0);

  double lo = 0, hi = 0;
  bool any = false;
  for (std::size_t iy = 0; iy < map.ny; ++iy)
    for (std::size_t ix = 0; ix < map.nx; ++ix)
      if (map.valid(iy, ix)) {
        const double v = map.values.at(iy, ix);
        if (!any) {
          lo = hi = v;
          any = true;
        } else {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }

  for (std::size_t iy = 0; iy < map.ny; ++iy)
    for (std::size_t ix = 0; ix < map.nx; ++ix) {
      unsigned char* p = img.at(ix, map.ny - 1 - iy);  // y up
      if (!map.valid(iy, ix)) {
        p[0] = 12;
        p[1] = 12;
        p[2] = 48;
        continue;
      }
      const unsigned char g = to_byte(map.values.at(iy, ix), lo, hi);
      p[0] = g;
      p[1] = g;
      p[2] = g;
    }

  if (map.dead)
    for (std::size_t i = 0; i < img.w * img.h; ++i) {
      unsigned char* p = img.px.data() + 3 * i;
      p[0] = static_cast<unsigned char>(std::min(255, p[0] / 2 + 140));
      p[1] /= 2;
      p[2] /= 2;
    }
  return img;
}

RgbImage montage(const std::vector<RgbImage>& tiles, std::size_t cols,
                 std::size_t pad) {
  if (tiles.empty() || cols == 0) throw ConfigError("montage: nothing to lay out");
  std::size_t tw = 0, th = 0;
  for (const auto& t : tiles) {
    tw = std::max(tw, t.w);
    th = std::max(th, t.h);
  }
  const std::size_t rows = (tiles.size() + cols - 1) / cols;
  RgbImage out;
  out.w = cols * tw + (cols + 1) * pad;
  out.h = rows * th + (rows + 1) * pad;
  out.px.assign(3 * out.w * out.h, 24);

  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const auto& t = tiles[i];
    const std::size_t cx = (i % cols) * (tw + pad) + pad;
    const std::size_t cy = (i / cols) * (th + pad) + pad;
    for (std::size_t y = 0; y < t.h; ++y)
      for (std::size_t x = 0; x < t.w; ++x) {
        const unsigned char* s = t.px.data() + 3 * (y * t.w + x);
        unsigned char* d = out.px.data() + 3 * ((cy + y) * out.w + (cx + x));
        d[0] = s[0];
        d[1] = s[1];
        d[2] = s[2];
      }
  }
  return out;
}

}  // namespace gridssl
