#pragma once

#include <cstdint>
#include <vector>

namespace satsweep {

// Planar raster: plane c occupies data[c*width*height .. (c+1)*width*height).
template <typename T>
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;

  Raster() = default;
  Raster(int w, int h, int c = 1, T fill = T{})
      : width(w), height(h), channels(c),
        data(static_cast<size_t>(w) * h * c, fill) {}

  T& at(int x, int y, int c = 0) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  T at(int x, int y, int c = 0) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
  bool empty() const { return data.empty(); }
};

using RasterF = Raster<float>;
using MaskU8 = Raster<uint8_t>;

}  // namespace satsweep
