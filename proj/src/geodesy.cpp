#include "satsweep/geodesy.h"

#include <cmath>

#include "satsweep/geometry.h"

namespace satsweep {

namespace {

constexpr double kA = 6378137.0;                // WGS-84 semi-major axis
constexpr double kF = 1.0 / 298.257223563;      // flattening
constexpr double kK0 = 0.9996;
constexpr double kFalseEasting = 500000.0;
constexpr double kFalseNorthingSouth = 10000000.0;
constexpr double kDeg = M_PI / 180.0;

struct Series {
  double n;
  double e;        // first eccentricity
  double a_rect;   // rectifying radius A
  double alpha[6];
  double beta[6];
};

// Krueger series in the third flattening n, sixth order.
const Series& series() {
  static const Series s = [] {
    Series v{};
    const double n = kF / (2.0 - kF);
    v.n = n;
    v.e = std::sqrt(kF * (2.0 - kF));
    const double n2 = n * n, n3 = n2 * n, n4 = n3 * n, n5 = n4 * n,
                 n6 = n5 * n;
    v.a_rect = kA / (1.0 + n) *
               (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
    v.alpha[0] = n / 2.0 - 2.0 / 3.0 * n2 + 5.0 / 16.0 * n3 +
                 41.0 / 180.0 * n4 - 127.0 / 288.0 * n5 +
                 7891.0 / 37800.0 * n6;
    v.alpha[1] = 13.0 / 48.0 * n2 - 3.0 / 5.0 * n3 + 557.0 / 1440.0 * n4 +
                 281.0 / 630.0 * n5 - 1983433.0 / 1935360.0 * n6;
    v.alpha[2] = 61.0 / 240.0 * n3 - 103.0 / 140.0 * n4 +
                 15061.0 / 26880.0 * n5 + 167603.0 / 181440.0 * n6;
    v.alpha[3] = 49561.0 / 161280.0 * n4 - 179.0 / 168.0 * n5 +
                 6601661.0 / 7257600.0 * n6;
    v.alpha[4] = 34729.0 / 80640.0 * n5 - 3418889.0 / 1995840.0 * n6;
    v.alpha[5] = 212378941.0 / 319334400.0 * n6;
    v.beta[0] = n / 2.0 - 2.0 / 3.0 * n2 + 37.0 / 96.0 * n3 -
                1.0 / 360.0 * n4 - 81.0 / 512.0 * n5 +
                96199.0 / 604800.0 * n6;
    v.beta[1] = 1.0 / 48.0 * n2 + 1.0 / 15.0 * n3 - 437.0 / 1440.0 * n4 +
                46.0 / 105.0 * n5 - 1118711.0 / 3870720.0 * n6;
    v.beta[2] = 17.0 / 480.0 * n3 - 37.0 / 840.0 * n4 -
                209.0 / 4480.0 * n5 + 5569.0 / 90720.0 * n6;
    v.beta[3] = 4397.0 / 161280.0 * n4 - 11.0 / 504.0 * n5 -
                830251.0 / 7257600.0 * n6;
    v.beta[4] = 4583.0 / 161280.0 * n5 - 108847.0 / 3991680.0 * n6;
    v.beta[5] = 20648693.0 / 638668800.0 * n6;
    return v;
  }();
  return s;
}

}  // namespace

int utm_zone_from_longitude(double lon_deg) {
  while (lon_deg < -180.0) lon_deg += 360.0;
  while (lon_deg >= 180.0) lon_deg -= 360.0;
  int zone = static_cast<int>(std::floor((lon_deg + 180.0) / 6.0)) + 1;
  if (zone < 1) zone = 1;
  if (zone > 60) zone = 60;
  return zone;
}

double utm_central_meridian(int zone) { return zone * 6.0 - 183.0; }

UtmCoord geodetic_to_utm(double lat_deg, double lon_deg, int forced_zone,
                         bool force_south) {
  if (std::fabs(lat_deg) >= 84.0)
    throw Error("geodetic_to_utm: latitude outside UTM domain");
  const Series& s = series();
  const int zone = forced_zone > 0 ? forced_zone
                                   : utm_zone_from_longitude(lon_deg);
  const double lam = (lon_deg - utm_central_meridian(zone)) * kDeg;
  const double phi = lat_deg * kDeg;

  // conformal latitude via tau' (Karney 2011)
  const double sphi = std::sin(phi);
  const double tau = std::tan(phi);
  const double sigma = std::sinh(s.e * std::atanh(s.e * sphi));
  const double taup = tau * std::sqrt(1.0 + sigma * sigma) -
                      sigma * std::sqrt(1.0 + tau * tau);

  const double xi_p = std::atan2(taup, std::cos(lam));
  const double eta_p = std::asinh(
      std::sin(lam) / std::sqrt(taup * taup + std::cos(lam) * std::cos(lam)));

  double xi = xi_p, eta = eta_p;
  for (int j = 1; j <= 6; ++j) {
    xi += s.alpha[j - 1] * std::sin(2.0 * j * xi_p) * std::cosh(2.0 * j * eta_p);
    eta += s.alpha[j - 1] * std::cos(2.0 * j * xi_p) * std::sinh(2.0 * j * eta_p);
  }

  UtmCoord out;
  out.zone = zone;
  out.south = force_south || lat_deg < 0.0;
  out.easting = kFalseEasting + kK0 * s.a_rect * eta;
  out.northing = kK0 * s.a_rect * xi + (out.south ? kFalseNorthingSouth : 0.0);
  return out;
}

void utm_to_geodetic(const UtmCoord& utm, double& lat_deg, double& lon_deg) {
  const Series& s = series();
  const double xi =
      (utm.northing - (utm.south ? kFalseNorthingSouth : 0.0)) /
      (kK0 * s.a_rect);
  const double eta = (utm.easting - kFalseEasting) / (kK0 * s.a_rect);

  double xi_p = xi, eta_p = eta;
  for (int j = 1; j <= 6; ++j) {
    xi_p -= s.beta[j - 1] * std::sin(2.0 * j * xi) * std::cosh(2.0 * j * eta);
    eta_p -= s.beta[j - 1] * std::cos(2.0 * j * xi) * std::sinh(2.0 * j * eta);
  }

  const double taup =
      std::sin(xi_p) /
      std::sqrt(std::sinh(eta_p) * std::sinh(eta_p) +
                std::cos(xi_p) * std::cos(xi_p));

  // invert tau' -> tau by Newton (converges in a few steps)
  double tau = taup;
  for (int it = 0; it < 8; ++it) {
    const double sigma =
        std::sinh(s.e * std::atanh(s.e * tau / std::sqrt(1.0 + tau * tau)));
    const double taup_i = tau * std::sqrt(1.0 + sigma * sigma) -
                          sigma * std::sqrt(1.0 + tau * tau);
    const double dtaup =
        (1.0 - s.e * s.e) * std::sqrt((1.0 + taup_i * taup_i) *
                                      (1.0 + tau * tau)) /
        (1.0 + (1.0 - s.e * s.e) * tau * tau);
    const double dtau = (taup - taup_i) / dtaup;
    tau += dtau;
    if (std::fabs(dtau) < 1e-15 * (1.0 + std::fabs(tau))) break;
  }

  lat_deg = std::atan(tau) / kDeg;
  lon_deg = utm_central_meridian(utm.zone) +
            std::atan2(std::sinh(eta_p), std::cos(xi_p)) / kDeg;
}

double meters_per_degree_lat(double lat_deg) {
  const double phi = lat_deg * kDeg;
  return 111132.92 - 559.82 * std::cos(2 * phi) + 1.175 * std::cos(4 * phi) -
         0.0023 * std::cos(6 * phi);
}

double meters_per_degree_lon(double lat_deg) {
  const double phi = lat_deg * kDeg;
  return 111412.84 * std::cos(phi) - 93.5 * std::cos(3 * phi) +
         0.118 * std::cos(5 * phi);
}

}  // namespace satsweep
