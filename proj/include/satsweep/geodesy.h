#pragma once

namespace satsweep {

struct UtmCoord {
  double easting = 0.0;   // meters
  double northing = 0.0;  // meters
  int zone = 0;           // 1..60
  bool south = false;
};

// WGS-84 geodetic -> UTM (k0 = 0.9996, false easting 500 km, false northing
// 10000 km south). Zone is chosen from longitude unless forced_zone > 0.
// Sixth-order Krueger series, sub-millimeter inside a zone. Throws for
// |lat| >= 84 degrees.
UtmCoord geodetic_to_utm(double lat_deg, double lon_deg, int forced_zone = 0,
                         bool force_south = false);

void utm_to_geodetic(const UtmCoord& utm, double& lat_deg, double& lon_deg);

int utm_zone_from_longitude(double lon_deg);
double utm_central_meridian(int zone);

// Local ground resolution of one degree of latitude/longitude (meters),
// for sizing blocks and grids.
double meters_per_degree_lat(double lat_deg);
double meters_per_degree_lon(double lat_deg);

}  // namespace satsweep
