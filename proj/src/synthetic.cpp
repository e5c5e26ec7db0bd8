#include "satsweep/synthetic.h"

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "satsweep/geodesy.h"
#include "satsweep/parallel.h"
#include "satsweep/raster_io.h"

namespace satsweep {

namespace {

double uniform(std::mt19937_64& rng, double a, double b) {
  // portable: derive from raw engine output, not distribution objects
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return a + (b - a) * u;
}

// splitmix64 finalizer over a combined lattice key
inline double lattice_value(int64_t ix, int64_t iy, uint64_t seed) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ull * static_cast<uint64_t>(ix) +
               0xbf58476d1ce4e5b9ull * static_cast<uint64_t>(iy);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z = z ^ (z >> 31);
  return static_cast<double>(z >> 11) * 0x1.0p-52 - 1.0;  // [-1, 1)
}

// C2-smooth value noise on the unit lattice
double value_noise(double x, double y, uint64_t seed) {
  const double fx = std::floor(x), fy = std::floor(y);
  const int64_t ix = static_cast<int64_t>(fx);
  const int64_t iy = static_cast<int64_t>(fy);
  double tx = x - fx, ty = y - fy;
  tx = tx * tx * tx * (tx * (tx * 6.0 - 15.0) + 10.0);
  ty = ty * ty * ty * (ty * (ty * 6.0 - 15.0) + 10.0);
  const double v00 = lattice_value(ix, iy, seed);
  const double v10 = lattice_value(ix + 1, iy, seed);
  const double v01 = lattice_value(ix, iy + 1, seed);
  const double v11 = lattice_value(ix + 1, iy + 1, seed);
  return v00 * (1 - tx) * (1 - ty) + v10 * tx * (1 - ty) +
         v01 * (1 - tx) * ty + v11 * tx * ty;
}

}  // namespace

// ---------------------------------------------------------------------------
// PinholeProjector

PinholeProjector::PinholeProjector(const double P[12], double center_lat,
                                   double center_lon) {
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) p_[r][c] = P[r * 4 + c];
  zone_ = utm_zone_from_longitude(center_lon);
  south_ = center_lat < 0.0;
  const UtmCoord u = geodetic_to_utm(center_lat, center_lon, zone_, south_);
  origin_e_ = u.easting;
  origin_n_ = u.northing;
}

ImagePoint PinholeProjector::project(const GroundPoint& g) const {
  const UtmCoord u = geodetic_to_utm(g.lat, g.lon, zone_, south_);
  const double e = u.easting - origin_e_;
  const double n = u.northing - origin_n_;
  const double w = p_[2][0] * e + p_[2][1] * n + p_[2][2] * g.hei + p_[2][3];
  if (std::fabs(w) < 1e-15)
    throw Error("pinhole projector: point on the principal plane");
  return {(p_[0][0] * e + p_[0][1] * n + p_[0][2] * g.hei + p_[0][3]) / w,
          (p_[1][0] * e + p_[1][1] * n + p_[1][2] * g.hei + p_[1][3]) / w};
}

GroundPoint PinholeProjector::localize(const ImagePoint& q, double hei) const {
  // intersect the viewing ray with the plane Z = hei: two linear equations
  // in (e, n)
  const double a00 = p_[0][0] - q.samp * p_[2][0];
  const double a01 = p_[0][1] - q.samp * p_[2][1];
  const double b0 = -(p_[0][2] - q.samp * p_[2][2]) * hei -
                    (p_[0][3] - q.samp * p_[2][3]);
  const double a10 = p_[1][0] - q.line * p_[2][0];
  const double a11 = p_[1][1] - q.line * p_[2][1];
  const double b1 = -(p_[1][2] - q.line * p_[2][2]) * hei -
                    (p_[1][3] - q.line * p_[2][3]);
  const double det = a00 * a11 - a01 * a10;
  if (std::fabs(det) < 1e-18)
    throw Error("pinhole projector: ray parallel to the height plane");
  const double e = (b0 * a11 - b1 * a01) / det;
  const double n = (a00 * b1 - a10 * b0) / det;
  UtmCoord u;
  u.easting = e + origin_e_;
  u.northing = n + origin_n_;
  u.zone = zone_;
  u.south = south_;
  GroundPoint g;
  utm_to_geodetic(u, g.lat, g.lon);
  g.hei = hei;
  return g;
}

// ---------------------------------------------------------------------------
// PushbroomProjector

PushbroomProjector::PushbroomProjector(const Params& p) : prm_(p) {
  zone_ = utm_zone_from_longitude(p.center_lon);
  south_ = p.center_lat < 0.0;
  const UtmCoord u =
      geodetic_to_utm(p.center_lat, p.center_lon, zone_, south_);
  origin_e_ = u.easting;
  origin_n_ = u.northing;
}

ImagePoint PushbroomProjector::project(const GroundPoint& g) const {
  const UtmCoord u = geodetic_to_utm(g.lat, g.lon, zone_, south_);
  const double e = u.easting - origin_e_;
  const double n = u.northing - origin_n_;
  const double denom = prm_.altitude - g.hei;
  if (denom < 1.0)
    throw Error("pushbroom projector: point above the sensor");
  const double line =
      prm_.line_center + (n + g.hei * prm_.tan_along) / prm_.gsd_line;
  const double samp =
      prm_.samp_center +
      ((e - prm_.cam_offset_e) * prm_.altitude / denom + prm_.cam_offset_e) /
          prm_.gsd_samp;
  return {samp, line};
}

void PushbroomProjector::localize_utm(const ImagePoint& q, double hei,
                                      double& easting,
                                      double& northing) const {
  northing = origin_n_ + (q.line - prm_.line_center) * prm_.gsd_line -
             hei * prm_.tan_along;
  easting = origin_e_ +
            ((q.samp - prm_.samp_center) * prm_.gsd_samp - prm_.cam_offset_e) *
                (prm_.altitude - hei) / prm_.altitude +
            prm_.cam_offset_e;
}

GroundPoint PushbroomProjector::localize(const ImagePoint& q,
                                         double hei) const {
  UtmCoord u;
  localize_utm(q, hei, u.easting, u.northing);
  u.zone = zone_;
  u.south = south_;
  GroundPoint g;
  utm_to_geodetic(u, g.lat, g.lon);
  g.hei = hei;
  return g;
}

void PushbroomProjector::height_parallax_rate(double& dsamp,
                                              double& dline) const {
  dsamp = -prm_.cam_offset_e / (prm_.altitude * prm_.gsd_samp);
  dline = prm_.tan_along / prm_.gsd_line;
}

// ---------------------------------------------------------------------------
// RPC generation

RpcModel gen_rpc_from_projector(const AnalyticProjector& proj,
                                const SceneCube& cube,
                                const RpcFitOptions& opt,
                                double* out_residual_px) {
  RpcModel m;
  m.lat_off = 0.5 * (cube.bounds.lat0 + cube.bounds.lat1);
  m.lat_scale = 0.5 * (cube.bounds.lat1 - cube.bounds.lat0);
  m.lon_off = 0.5 * (cube.bounds.lon0 + cube.bounds.lon1);
  m.lon_scale = 0.5 * (cube.bounds.lon1 - cube.bounds.lon0);
  m.hei_off = 0.5 * (cube.h_min + cube.h_max);
  m.hei_scale = 0.5 * (cube.h_max - cube.h_min);
  m.height_min = cube.h_min;
  m.height_max = cube.h_max;
  if (m.lat_scale <= 0 || m.lon_scale <= 0 || m.hei_scale <= 0)
    throw Error("rpc generation: empty cube");

  const GridSpec3& fg = opt.fit_grid;
  const int n_samples = fg.nx * fg.ny * fg.nz;
  std::vector<double> lat_n(n_samples), lon_n(n_samples), hei_n(n_samples);
  std::vector<ImagePoint> img(n_samples);
  double smin = 1e300, smax = -1e300, lmin = 1e300, lmax = -1e300;
  int k = 0;
  for (int iz = 0; iz < fg.nz; ++iz)
    for (int iy = 0; iy < fg.ny; ++iy)
      for (int ix = 0; ix < fg.nx; ++ix, ++k) {
        lon_n[k] = -1.0 + 2.0 * ix / (fg.nx - 1);
        lat_n[k] = -1.0 + 2.0 * iy / (fg.ny - 1);
        hei_n[k] = -1.0 + 2.0 * iz / (fg.nz - 1);
        const GroundPoint g = {lat_n[k] * m.lat_scale + m.lat_off,
                               lon_n[k] * m.lon_scale + m.lon_off,
                               hei_n[k] * m.hei_scale + m.hei_off};
        img[k] = proj.project(g);
        smin = std::min(smin, img[k].samp);
        smax = std::max(smax, img[k].samp);
        lmin = std::min(lmin, img[k].line);
        lmax = std::max(lmax, img[k].line);
      }
  m.samp_off = 0.5 * (smin + smax);
  m.samp_scale = std::max(0.5 * (smax - smin), 1e-9);
  m.line_off = 0.5 * (lmin + lmax);
  m.line_scale = std::max(0.5 * (lmax - lmin), 1e-9);

  // least squares with the denominator constant pinned to 1:
  //   sum_t n_t T_t - v * sum_{t>=1} d_t T_t = v
  auto fit_forward = [&](auto&& value_of, Poly20& num, Poly20& den) {
    Eigen::MatrixXd A(n_samples, 39);
    Eigen::VectorXd b(n_samples);
    for (int i = 0; i < n_samples; ++i) {
      const double v = value_of(i);
      double t[20];
      for (int j = 0; j < 20; ++j) {
        const int* e = kPoly20Exp[j];
        t[j] = std::pow(lon_n[i], e[0]) * std::pow(lat_n[i], e[1]) *
               std::pow(hei_n[i], e[2]);
        A(i, j) = t[j];
      }
      for (int j = 1; j < 20; ++j) A(i, 20 + j - 1) = -v * t[j];
      b(i) = v;
    }
    // exactly-polynomial targets legitimately collapse the denominator
    // columns onto the numerator span; the threshold keeps that stable
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-10);
    if (qr.rank() < 20)
      throw Error("rpc generation failure: rank-deficient fit system");
    const Eigen::VectorXd x = qr.solve(b);
    for (int j = 0; j < 20; ++j) num.c[j] = x(j);
    den.c[0] = 1.0;
    for (int j = 1; j < 20; ++j) den.c[j] = x(20 + j - 1);
  };

  fit_forward(
      [&](int i) { return (img[i].samp - m.samp_off) / m.samp_scale; },
      m.samp_num, m.samp_den);
  fit_forward(
      [&](int i) { return (img[i].line - m.line_off) / m.line_scale; },
      m.line_num, m.line_den);

  validate_rpc(m);

  // residual vs the projector on the denser check grid
  const GridSpec3& cg = opt.check_grid;
  double max_res = 0.0;
  for (int iz = 0; iz < cg.nz; ++iz)
    for (int iy = 0; iy < cg.ny; ++iy)
      for (int ix = 0; ix < cg.nx; ++ix) {
        const GroundPoint g = {
            m.lat_off + m.lat_scale * (-1.0 + 2.0 * iy / (cg.ny - 1)),
            m.lon_off + m.lon_scale * (-1.0 + 2.0 * ix / (cg.nx - 1)),
            m.hei_off + m.hei_scale * (-1.0 + 2.0 * iz / (cg.nz - 1))};
        const ImagePoint truth = proj.project(g);
        const ImagePoint fitted = project_forward(m, g);
        max_res = std::max(max_res, std::hypot(fitted.samp - truth.samp,
                                               fitted.line - truth.line));
      }
  if (out_residual_px) *out_residual_px = max_res;
  if (max_res > opt.max_residual_px)
    throw Error("rpc generation failure: fit residual " +
                std::to_string(max_res) + " px exceeds " +
                std::to_string(opt.max_residual_px) +
                " px (cube too large for a cubic rational fit)");

  fit_inverse_rpc(m, opt.inverse_grid);
  return m;
}

// ---------------------------------------------------------------------------
// scene generation

double SyntheticScene::terrain_height_utm(double easting,
                                          double northing) const {
  const double e = easting - origin_e;
  const double n = northing - origin_n;
  double v = ramp_rate * e;
  for (const Bump& b : bumps) {
    const double de = e - b.e, dn = n - b.n;
    v += b.amp * std::exp(-0.5 * (de * de + dn * dn) / (b.sigma * b.sigma));
  }
  return terrain_offset + terrain_scale * v;
}

double SyntheticScene::texture_value_utm(double easting,
                                         double northing) const {
  const double e = easting - origin_e;
  const double n = northing - origin_n;
  double v = 0.0;
  for (const Octave& o : octaves)
    v += o.amp * value_noise(e * o.inv_wavelength, n * o.inv_wavelength,
                             o.seed);
  v = texture_offset + texture_scale * v;
  return std::clamp(v, 0.02, 0.98);
}

double SyntheticScene::terrain_height(double lat, double lon) const {
  const UtmCoord u = geodetic_to_utm(lat, lon, zone, south);
  return terrain_height_utm(u.easting, u.northing);
}

double SyntheticScene::texture_value(double lat, double lon) const {
  const UtmCoord u = geodetic_to_utm(lat, lon, zone, south);
  return texture_value_utm(u.easting, u.northing);
}

void render_view(const SyntheticScene& scene, SyntheticView& view,
                 int threads) {
  const int size = scene.params.image_size;
  view.image = RasterF(size, size, 1, 0.0f);
  view.true_height =
      RasterF(size, size, 1, std::numeric_limits<float>::quiet_NaN());
  const double h_lo = scene.cube.h_min;
  const double h_hi = scene.cube.h_max;
  const PushbroomProjector& proj = *view.projector;

  parallel_for(0, size, threads, [&](int64_t row) {
    for (int col = 0; col < size; ++col) {
      const ImagePoint q{static_cast<double>(col), static_cast<double>(row)};
      // the push-broom ray is affine in h, so two endpoints define it
      double e_lo, n_lo, e_hi, n_hi;
      proj.localize_utm(q, h_lo, e_lo, n_lo);
      proj.localize_utm(q, h_hi, e_hi, n_hi);
      const double span = h_hi - h_lo;
      auto above = [&](double h) {
        const double t = (h - h_lo) / span;
        return h - scene.terrain_height_utm(e_lo + t * (e_hi - e_lo),
                                            n_lo + t * (n_hi - n_lo));
      };
      if (above(h_lo) > 0.0) continue;  // terrain below the search range
      if (above(h_hi) <= 0.0) continue;  // no crossing inside the range
      double lo = h_lo, hi = h_hi;
      while (hi - lo > 1e-4) {
        const double mid = 0.5 * (lo + hi);
        if (above(mid) <= 0.0)
          lo = mid;
        else
          hi = mid;
      }
      const double h = 0.5 * (lo + hi);
      const double t = (h - h_lo) / span;
      view.true_height.at(col, static_cast<int>(row)) = static_cast<float>(h);
      view.image.at(col, static_cast<int>(row)) =
          static_cast<float>(scene.texture_value_utm(
              e_lo + t * (e_hi - e_lo), n_lo + t * (n_hi - n_lo)));
    }
  });
}

SyntheticScene gen_scene(const SceneParams& params) {
  SyntheticScene scene;
  scene.params = params;
  scene.m_per_deg_lat = meters_per_degree_lat(params.center_lat);
  scene.m_per_deg_lon = meters_per_degree_lon(params.center_lat);

  const double half_m = 0.5 * params.image_size * params.gsd;
  scene.cube.bounds.lat0 = params.center_lat - half_m / scene.m_per_deg_lat;
  scene.cube.bounds.lat1 = params.center_lat + half_m / scene.m_per_deg_lat;
  scene.cube.bounds.lon0 = params.center_lon - half_m / scene.m_per_deg_lon;
  scene.cube.bounds.lon1 = params.center_lon + half_m / scene.m_per_deg_lon;
  scene.cube.h_min = params.range_min;
  scene.cube.h_max = params.range_max;

  scene.zone = utm_zone_from_longitude(params.center_lon);
  scene.south = params.center_lat < 0.0;
  const UtmCoord center =
      geodetic_to_utm(params.center_lat, params.center_lon, scene.zone,
                      scene.south);
  scene.origin_e = center.easting;
  scene.origin_n = center.northing;

  // terrain: seeded bumps plus optional ramp, rescaled to
  // [base, base + relief]
  {
    std::mt19937_64 rng(params.terrain_seed);
    const double sig_lo = std::max(200.0, 0.8 * params.relief);
    const double sig_hi = std::max(500.0, 2.0 * params.relief);
    for (int i = 0; i < params.terrain_bumps; ++i) {
      SyntheticScene::Bump b;
      b.e = uniform(rng, -0.9 * half_m, 0.9 * half_m);
      b.n = uniform(rng, -0.9 * half_m, 0.9 * half_m);
      b.sigma = uniform(rng, sig_lo, sig_hi);
      b.amp = uniform(rng, -1.0, 1.0);
      scene.bumps.push_back(b);
    }
    scene.ramp_rate =
        params.ramp_frac > 0.0 ? params.ramp_frac / (2.0 * half_m) : 0.0;
    scene.terrain_offset = 0.0;
    scene.terrain_scale = 1.0;

    // rescale the raw field so heights span exactly the requested relief
    double vmin = 1e300, vmax = -1e300;
    const int n = 81;
    for (int iy = 0; iy < n; ++iy)
      for (int ix = 0; ix < n; ++ix) {
        const double lat = scene.cube.bounds.lat0 +
                           (scene.cube.bounds.lat1 - scene.cube.bounds.lat0) *
                               iy / (n - 1);
        const double lon = scene.cube.bounds.lon0 +
                           (scene.cube.bounds.lon1 - scene.cube.bounds.lon0) *
                               ix / (n - 1);
        const double v = scene.terrain_height(lat, lon);
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
      }
    if (vmax - vmin > 1e-12) {
      scene.terrain_scale = params.relief / (vmax - vmin);
      scene.terrain_offset = params.base_height - vmin * scene.terrain_scale;
    } else {
      scene.terrain_scale = 0.0;
      scene.terrain_offset = params.base_height;
    }
  }
  if (params.base_height < params.range_min ||
      params.base_height + params.relief > params.range_max)
    throw Error("gen_scene: terrain relief exceeds the height range");

  // texture: multi-octave value noise; wavelengths cover the whole pyramid
  // (finest texture scale up to half the image) so every level of the
  // coarse-to-fine matcher sees structure, and nothing is periodic
  {
    std::mt19937_64 rng(params.texture_seed);
    const double wl_lo = params.min_texture_wavelength_px * params.gsd;
    const double wl_hi =
        std::max(8.0 * wl_lo, 0.5 * params.image_size * params.gsd);
    for (double wl = wl_lo; wl <= wl_hi * 1.001; wl *= 2.0) {
      SyntheticScene::Octave o;
      o.inv_wavelength = 1.0 / wl;
      o.amp = uniform(rng, 0.8, 1.2);
      o.seed = rng();
      scene.octaves.push_back(o);
    }
    // calibrate to mean 0.5, std 0.16 over the cube (deterministic)
    scene.texture_scale = 1.0;
    scene.texture_offset = 0.0;
    double sum = 0.0, sum_sq = 0.0;
    const int n = 257;
    const UtmCoord c0 = geodetic_to_utm(scene.cube.bounds.lat0,
                                        scene.cube.bounds.lon0, scene.zone,
                                        scene.south);
    for (int iy = 0; iy < n; ++iy)
      for (int ix = 0; ix < n; ++ix) {
        const double e = c0.easting + 2.0 * half_m * ix / (n - 1);
        const double nn = c0.northing + 2.0 * half_m * iy / (n - 1);
        double v = 0.0;
        for (const auto& o : scene.octaves)
          v += o.amp * value_noise((e - scene.origin_e) * o.inv_wavelength,
                                   (nn - scene.origin_n) * o.inv_wavelength,
                                   o.seed);
        sum += v;
        sum_sq += v * v;
      }
    const double mean = sum / (n * n);
    const double std_dev =
        std::sqrt(std::max(1e-12, sum_sq / (n * n) - mean * mean));
    scene.texture_scale = 0.16 / std_dev;
    scene.texture_offset = 0.5 - mean * scene.texture_scale;
  }

  // three TLC-like views: nadir plus forward/backward along-track tilts
  const double tan_a = std::tan(params.view_angle_deg * M_PI / 180.0);
  const double tans[3] = {0.0, tan_a, -tan_a};
  for (int v = 0; v < 3; ++v) {
    PushbroomProjector::Params pp;
    pp.center_lat = params.center_lat;
    pp.center_lon = params.center_lon;
    pp.gsd_samp = params.gsd;
    pp.gsd_line = params.gsd;
    pp.altitude = 600000.0;
    pp.tan_along = tans[v];
    pp.cam_offset_e = 1500.0 * (v == 0 ? 0.0 : (v == 1 ? 1.0 : -1.0));
    pp.samp_center = 0.5 * (params.image_size - 1);
    pp.line_center = 0.5 * (params.image_size - 1);
    SyntheticView view;
    view.projector = std::make_shared<PushbroomProjector>(pp);
    view.rpc = gen_rpc_from_projector(*view.projector, scene.cube);
    scene.views.push_back(std::move(view));
  }

  // suggested AOI: interior region that stays inside every view, padded for
  // the terrain-height parallax of the tilted views
  {
    const double margin_px =
        24.0 +
        (params.base_height + params.relief) * tan_a / params.gsd;
    const double margin_m = margin_px * params.gsd;
    scene.aoi.lat0 =
        scene.cube.bounds.lat0 + margin_m / scene.m_per_deg_lat;
    scene.aoi.lat1 =
        scene.cube.bounds.lat1 - margin_m / scene.m_per_deg_lat;
    scene.aoi.lon0 =
        scene.cube.bounds.lon0 + margin_m / scene.m_per_deg_lon;
    scene.aoi.lon1 =
        scene.cube.bounds.lon1 - margin_m / scene.m_per_deg_lon;
    if (scene.aoi.empty()) throw Error("gen_scene: image too small for an AOI");
  }

  // ground truth over the AOI
  {
    const UtmCoord c00 =
        geodetic_to_utm(scene.aoi.lat0, scene.aoi.lon0, scene.zone, scene.south);
    const UtmCoord c01 =
        geodetic_to_utm(scene.aoi.lat0, scene.aoi.lon1, scene.zone, scene.south);
    const UtmCoord c10 =
        geodetic_to_utm(scene.aoi.lat1, scene.aoi.lon0, scene.zone, scene.south);
    const UtmCoord c11 =
        geodetic_to_utm(scene.aoi.lat1, scene.aoi.lon1, scene.zone, scene.south);
    const double emin = std::min({c00.easting, c01.easting, c10.easting, c11.easting});
    const double emax = std::max({c00.easting, c01.easting, c10.easting, c11.easting});
    const double nmin = std::min({c00.northing, c01.northing, c10.northing, c11.northing});
    const double nmax = std::max({c00.northing, c01.northing, c10.northing, c11.northing});
    Dsm& g = scene.ground_truth;
    g.zone = scene.zone;
    g.south = scene.south;
    g.cell = params.dsm_cell;
    g.xll = std::floor(emin / g.cell) * g.cell;
    g.yll = std::floor(nmin / g.cell) * g.cell;
    g.cols = static_cast<int>(std::ceil((emax - g.xll) / g.cell));
    g.rows = static_cast<int>(std::ceil((nmax - g.yll) / g.cell));
    g.values.assign(static_cast<size_t>(g.rows) * g.cols, g.nodata);
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c)
        g.at(r, c) = scene.terrain_height_utm(g.center_e(c), g.center_n(r));
  }

  if (params.render)
    for (SyntheticView& view : scene.views)
      render_view(scene, view, params.threads);

  return scene;
}

void write_scene_bundle(const SyntheticScene& scene, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["terrain_seed"] = scene.params.terrain_seed;
  manifest["texture_seed"] = scene.params.texture_seed;
  manifest["image_size"] = scene.params.image_size;
  manifest["gsd_m"] = scene.params.gsd;
  manifest["relief_m"] = scene.params.relief;
  manifest["view_angle_deg"] = scene.params.view_angle_deg;
  manifest["utm_zone"] = scene.zone;
  manifest["south"] = scene.south;
  manifest["aoi"] = {{"lat0", scene.aoi.lat0},
                     {"lon0", scene.aoi.lon0},
                     {"lat1", scene.aoi.lat1},
                     {"lon1", scene.aoi.lon1}};
  manifest["height_range"] = {scene.cube.h_min, scene.cube.h_max};

  nlohmann::json views = nlohmann::json::array();
  for (size_t v = 0; v < scene.views.size(); ++v) {
    const std::string stem = "view_" + std::to_string(v);
    if (!scene.views[v].image.empty()) {
      RasterF scaled = scene.views[v].image;
      for (float& x : scaled.data) x *= 65535.0f;
      write_pgm(scaled, dir + "/" + stem + ".pgm", 65535);
      write_pfm(scene.views[v].true_height,
                dir + "/" + stem + "_height.pfm");
    }
    write_rpc_file(scene.views[v].rpc, dir + "/" + stem + ".rpc");
    views.push_back({{"image", stem + ".pgm"},
                     {"rpc", stem + ".rpc"},
                     {"true_height", stem + "_height.pfm"}});
  }
  manifest["views"] = views;
  write_esri_grid(scene.ground_truth, dir + "/ground_truth.asc");
  manifest["ground_truth"] = "ground_truth.asc";

  std::ofstream out(dir + "/manifest.json");
  if (!out) throw Error("cannot write scene manifest");
  out << manifest.dump(2) << "\n";
}

}  // namespace satsweep
