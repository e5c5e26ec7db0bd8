#include "satsweep/raster_io.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "satsweep/geometry.h"

namespace satsweep {

namespace {

// next whitespace-delimited token, skipping '#' comment lines
std::string next_token(std::istream& in) {
  std::string tok;
  while (in) {
    const int c = in.peek();
    if (c == EOF) break;
    if (std::isspace(c)) {
      in.get();
      continue;
    }
    if (c == '#') {
      std::string line;
      std::getline(in, line);
      continue;
    }
    in >> tok;
    return tok;
  }
  throw Error("PGM: truncated header");
}

}  // namespace

RasterF read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open PGM: " + path);
  if (next_token(in) != "P5") throw Error("PGM: bad magic in " + path);
  int width, height, maxval;
  try {
    width = std::stoi(next_token(in));
    height = std::stoi(next_token(in));
    maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    throw Error("PGM: bad header in " + path);
  }
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535)
    throw Error("PGM: bad header in " + path);
  in.get();  // the single whitespace after maxval

  RasterF img(width, height, 1);
  const size_t n = img.pixel_count();
  if (maxval < 256) {
    std::vector<uint8_t> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), n);
    if (!in) throw Error("PGM: truncated pixel data in " + path);
    for (size_t i = 0; i < n; ++i) img.data[i] = buf[i];
  } else {
    std::vector<uint8_t> buf(2 * n);
    in.read(reinterpret_cast<char*>(buf.data()), 2 * n);
    if (!in) throw Error("PGM: truncated pixel data in " + path);
    for (size_t i = 0; i < n; ++i)
      img.data[i] = static_cast<float>((buf[2 * i] << 8) | buf[2 * i + 1]);
  }
  return img;
}

void write_pgm(const RasterF& img, const std::string& path, int maxval) {
  if (img.channels != 1) throw Error("PGM: single-channel rasters only");
  if (maxval <= 0 || maxval > 65535) throw Error("PGM: bad maxval");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write PGM: " + path);
  out << "P5\n" << img.width << " " << img.height << "\n" << maxval << "\n";
  const size_t n = img.pixel_count();
  auto quantize = [&](float v) {
    const long r = std::lround(v);
    return std::clamp(r, 0l, static_cast<long>(maxval));
  };
  if (maxval < 256) {
    std::vector<uint8_t> buf(n);
    for (size_t i = 0; i < n; ++i)
      buf[i] = static_cast<uint8_t>(quantize(img.data[i]));
    out.write(reinterpret_cast<const char*>(buf.data()), n);
  } else {
    std::vector<uint8_t> buf(2 * n);
    for (size_t i = 0; i < n; ++i) {
      const long v = quantize(img.data[i]);
      buf[2 * i] = static_cast<uint8_t>(v >> 8);
      buf[2 * i + 1] = static_cast<uint8_t>(v & 0xff);
    }
    out.write(reinterpret_cast<const char*>(buf.data()), 2 * n);
  }
  if (!out) throw Error("PGM: write failed for " + path);
}

RasterF read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open PFM: " + path);
  std::string magic = next_token(in);
  if (magic != "Pf") throw Error("PFM: grayscale 'Pf' expected in " + path);
  int width, height;
  double scale;
  try {
    width = std::stoi(next_token(in));
    height = std::stoi(next_token(in));
    scale = std::stod(next_token(in));
  } catch (const std::exception&) {
    throw Error("PFM: bad header in " + path);
  }
  if (width <= 0 || height <= 0) throw Error("PFM: bad header in " + path);
  in.get();

  RasterF img(width, height, 1);
  std::vector<float> row(width);
  const bool little_endian = scale < 0;
  for (int y = height - 1; y >= 0; --y) {  // scanlines are bottom-up
    in.read(reinterpret_cast<char*>(row.data()), sizeof(float) * width);
    if (!in) throw Error("PFM: truncated pixel data in " + path);
    if (!little_endian) {
      for (float& v : row) {
        uint32_t u;
        std::memcpy(&u, &v, 4);
        u = __builtin_bswap32(u);
        std::memcpy(&v, &u, 4);
      }
    }
    std::copy(row.begin(), row.end(), img.data.begin() + static_cast<size_t>(y) * width);
  }
  return img;
}

void write_pfm(const RasterF& img, const std::string& path) {
  if (img.channels != 1) throw Error("PFM: single-channel rasters only");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write PFM: " + path);
  out << "Pf\n" << img.width << " " << img.height << "\n-1.0\n";
  for (int y = img.height - 1; y >= 0; --y)
    out.write(reinterpret_cast<const char*>(img.data.data() +
                                            static_cast<size_t>(y) * img.width),
              sizeof(float) * img.width);
  if (!out) throw Error("PFM: write failed for " + path);
}

}  // namespace satsweep
