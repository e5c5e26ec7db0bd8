#pragma once

#include <string>

#include "satsweep/raster.h"

namespace satsweep {

// Binary PGM (P5), 8- or 16-bit; sample values come back as raw counts.
RasterF read_pgm(const std::string& path);
void write_pgm(const RasterF& img, const std::string& path,
               int maxval = 65535);

// Grayscale PFM ('Pf'), float32, scanlines bottom-up, little-endian scale.
RasterF read_pfm(const std::string& path);
void write_pfm(const RasterF& img, const std::string& path);

}  // namespace satsweep
