#include <doctest.h>

#include <cmath>

#include "satsweep/geodesy.h"
#include "satsweep/geometry.h"

using namespace satsweep;

namespace {

struct UtmVector {
  double lat, lon;
  int zone;
  double easting, northing;
  bool south;
};

// generated by tests/oracle/utm_reference.py (mpmath, 50-digit)
const UtmVector kReference[] = {
    {30.0, 114.0, 50, 210590.346763535295, 3322575.90438476388, false},
    {30.0, 111.5, 49, 548224.151226527212, 3318890.56304543251, false},
    {30.0, 116.9, 50, 490355.228959254127, 3318789.56090916242, false},
    {0.0, 114.3, 50, 199445.590765400942, 0.0, false},
    {-33.5, 18.5, 34, 267757.541987554592, 6290483.18449516824, true},
    {-45.123456789, 170.987654321, 59, 499029.063492765175, 5003334.89237180101, true},
    {47.5, 9.0, 32, 500000.000000000000, 5260729.73307729123, false},
    {70.25, 25.75, 35, 452860.814280667051, 7794236.86364451251, false},
    {-0.0001, -78.45, 17, 783845.508778291027, 9999988.93596564318, true},
    {59.999, -135.001, 8, 499944.220635115681, 6651299.82307021520, false},
    {12.3456789, -0.5, 30, 771874.953438256975, 1366047.38750049757, false},
    {83.9, 100.0, 47, 511863.269248960213, 9317033.09711987985, false},
};

}  // namespace

TEST_SUITE("geodesy") {

TEST_CASE("equator on the central meridian maps to the false easting") {
  const UtmCoord c = geodetic_to_utm(0.0, utm_central_meridian(31));
  CHECK(c.zone == 31);
  CHECK(c.easting == doctest::Approx(500000.0).epsilon(1e-12));
  CHECK(std::fabs(c.northing) < 1e-9);
}

TEST_CASE("agreement with the high-precision reference vectors") {
  for (const UtmVector& v : kReference) {
    const UtmCoord c = geodetic_to_utm(v.lat, v.lon);
    CHECK(c.zone == v.zone);
    CHECK(c.south == v.south);
    CHECK(std::fabs(c.easting - v.easting) < 1e-3);
    CHECK(std::fabs(c.northing - v.northing) < 1e-3);
  }
}

TEST_CASE("round trip is identity to 1e-9 degrees across a zone") {
  for (double lat = -80.0; lat <= 80.0; lat += 13.37) {
    for (double dlon = -3.2; dlon <= 3.2; dlon += 0.57) {
      const double lon = 117.0 + dlon;  // zone 50 neighbourhood
      const UtmCoord c = geodetic_to_utm(lat, lon);
      double lat2, lon2;
      utm_to_geodetic(c, lat2, lon2);
      CHECK(std::fabs(lat2 - lat) < 1e-9);
      CHECK(std::fabs(lon2 - lon) < 1e-9);
    }
  }
}

TEST_CASE("polar latitudes are rejected") {
  CHECK_THROWS_AS(geodetic_to_utm(84.5, 10.0), Error);
  CHECK_THROWS_AS(geodetic_to_utm(-88.0, 10.0), Error);
}

TEST_CASE("forced zone stays on the requested meridian") {
  const UtmCoord a = geodetic_to_utm(30.0, 118.5);        // zone 50 naturally
  const UtmCoord b = geodetic_to_utm(30.0, 118.5, 51);    // forced neighbour
  CHECK(a.zone == 50);
  CHECK(b.zone == 51);
  double lat, lon;
  utm_to_geodetic(b, lat, lon);
  CHECK(std::fabs(lat - 30.0) < 1e-9);
  CHECK(std::fabs(lon - 118.5) < 1e-9);
}

}  // TEST_SUITE
