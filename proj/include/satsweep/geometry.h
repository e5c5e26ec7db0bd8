#pragma once

#include <stdexcept>
#include <string>

namespace satsweep {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Geodetic point, WGS-84: degrees, degrees, meters above ellipsoid.
struct GroundPoint {
  double lat = 0.0;
  double lon = 0.0;
  double hei = 0.0;
};

// Image point in pixels; samp = column (along-array), line = row (along-track).
struct ImagePoint {
  double samp = 0.0;
  double line = 0.0;
};

// Half-open pixel rectangle [x, x+w) x [y, y+h).
struct PixelRect {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  bool contains(double px, double py) const {
    return px >= x && px < x + w && py >= y && py < y + h;
  }
};

// Sample counts along (first, second, height) axes of a fitting grid.
struct GridSpec3 {
  int nx = 11;
  int ny = 11;
  int nz = 9;
};

struct LatLonRect {
  double lat0 = 0.0;  // south
  double lon0 = 0.0;  // west
  double lat1 = 0.0;  // north
  double lon1 = 0.0;  // east

  bool empty() const { return !(lat1 > lat0) || !(lon1 > lon0); }
};

}  // namespace satsweep
