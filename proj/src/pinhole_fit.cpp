#include "satsweep/pinhole_fit.h"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "satsweep/geodesy.h"

namespace satsweep {

ImagePoint ProjectionMatrix::project_local(double e, double n, double h) const {
  const double w = p[2][0] * e + p[2][1] * n + p[2][2] * h + p[2][3];
  if (std::fabs(w) < 1e-15)
    throw Error("pinhole projection: point on the principal plane");
  const double u = p[0][0] * e + p[0][1] * n + p[0][2] * h + p[0][3];
  const double v = p[1][0] * e + p[1][1] * n + p[1][2] * h + p[1][3];
  return {u / w, v / w};
}

namespace {

struct ControlPoint {
  double e, n, h;  // local meters
  double samp, line;
};

// image grid x height grid -> (local ground, pixel) correspondences
std::vector<ControlPoint> make_control_points(const RpcModel& m,
                                              const PixelRect& patch,
                                              double h_min, double h_max,
                                              const GridSpec3& grid, int zone,
                                              bool south, double origin_e,
                                              double origin_n) {
  std::vector<ControlPoint> pts;
  pts.reserve(static_cast<size_t>(grid.nx) * grid.ny * grid.nz);
  for (int iz = 0; iz < grid.nz; ++iz)
    for (int iy = 0; iy < grid.ny; ++iy)
      for (int ix = 0; ix < grid.nx; ++ix) {
        const double s = patch.x + patch.w * (grid.nx == 1
                                                  ? 0.5
                                                  : double(ix) / (grid.nx - 1));
        const double l = patch.y + patch.h * (grid.ny == 1
                                                  ? 0.5
                                                  : double(iy) / (grid.ny - 1));
        const double h =
            h_min + (h_max - h_min) *
                        (grid.nz == 1 ? 0.5 : double(iz) / (grid.nz - 1));
        const GroundPoint g = localize_iterative(m, {s, l}, h, 1e-9);
        const UtmCoord u = geodetic_to_utm(g.lat, g.lon, zone, south);
        pts.push_back({u.easting - origin_e, u.northing - origin_n, h, s, l});
      }
  return pts;
}

// classical DLT with Hartley-style normalization of both point sets
void solve_dlt(const std::vector<ControlPoint>& pts, double P[3][4]) {
  const int n = static_cast<int>(pts.size());
  if (n < 6) throw Error("pinhole fit: need at least 6 control points");

  double cu = 0, cv = 0;
  for (const auto& p : pts) {
    cu += p.samp;
    cv += p.line;
  }
  cu /= n;
  cv /= n;
  double d2 = 0;
  for (const auto& p : pts) d2 += std::hypot(p.samp - cu, p.line - cv);
  d2 /= n;
  const double s2 = d2 > 0 ? std::sqrt(2.0) / d2 : 1.0;

  double ce = 0, cn = 0, ch = 0;
  for (const auto& p : pts) {
    ce += p.e;
    cn += p.n;
    ch += p.h;
  }
  ce /= n;
  cn /= n;
  ch /= n;
  double d3 = 0;
  for (const auto& p : pts)
    d3 += std::sqrt((p.e - ce) * (p.e - ce) + (p.n - cn) * (p.n - cn) +
                    (p.h - ch) * (p.h - ch));
  d3 /= n;
  const double s3 = d3 > 0 ? std::sqrt(3.0) / d3 : 1.0;

  Eigen::MatrixXd A(2 * n, 12);
  for (int i = 0; i < n; ++i) {
    const double X = s3 * (pts[i].e - ce);
    const double Y = s3 * (pts[i].n - cn);
    const double Z = s3 * (pts[i].h - ch);
    const double u = s2 * (pts[i].samp - cu);
    const double v = s2 * (pts[i].line - cv);
    A.row(2 * i) << X, Y, Z, 1, 0, 0, 0, 0, -u * X, -u * Y, -u * Z, -u;
    A.row(2 * i + 1) << 0, 0, 0, 0, X, Y, Z, 1, -v * X, -v * Y, -v * Z, -v;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv(10) < 1e-9 * sv(0))
    throw Error("pinhole fit: degenerate (coplanar) control configuration");
  const Eigen::VectorXd h = svd.matrixV().col(11);

  // denormalize: P = T2^-1 * Pn * T3
  Eigen::Matrix3d T2inv;
  T2inv << 1.0 / s2, 0, cu, 0, 1.0 / s2, cv, 0, 0, 1;
  Eigen::Matrix4d T3;
  T3 << s3, 0, 0, -s3 * ce, 0, s3, 0, -s3 * cn, 0, 0, s3, -s3 * ch, 0, 0, 0, 1;
  Eigen::Matrix<double, 3, 4> Pn;
  Pn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8), h(9), h(10),
      h(11);
  Eigen::Matrix<double, 3, 4> Pd = T2inv * Pn * T3;

  const double rown = Pd.block<1, 3>(2, 0).norm();
  if (rown < 1e-18) throw Error("pinhole fit: rank-deficient solution");
  Pd /= rown;
  // keep positive depth at the control centroid
  if (Pd(2, 0) * ce + Pd(2, 1) * cn + Pd(2, 2) * ch + Pd(2, 3) < 0) Pd = -Pd;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) P[r][c] = Pd(r, c);
}

// Levenberg-Marquardt on the reprojection error over the raw 12 entries,
// re-normalized each step (gauge fixed by the unit last row)
void refine_lm(const std::vector<ControlPoint>& pts, double P[3][4]) {
  const int n = static_cast<int>(pts.size());
  Eigen::Matrix<double, 12, 1> x;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) x(r * 4 + c) = P[r][c];

  auto residuals = [&](const Eigen::Matrix<double, 12, 1>& p,
                       Eigen::VectorXd& r) {
    r.resize(2 * n);
    for (int i = 0; i < n; ++i) {
      const double w =
          p(8) * pts[i].e + p(9) * pts[i].n + p(10) * pts[i].h + p(11);
      const double u =
          p(0) * pts[i].e + p(1) * pts[i].n + p(2) * pts[i].h + p(3);
      const double v =
          p(4) * pts[i].e + p(5) * pts[i].n + p(6) * pts[i].h + p(7);
      r(2 * i) = u / w - pts[i].samp;
      r(2 * i + 1) = v / w - pts[i].line;
    }
  };

  Eigen::VectorXd r;
  residuals(x, r);
  double cost = r.squaredNorm();
  double lambda = 1e-6;

  for (int iter = 0; iter < 30; ++iter) {
    Eigen::MatrixXd J(2 * n, 12);
    for (int i = 0; i < n; ++i) {
      const double X = pts[i].e, Y = pts[i].n, Z = pts[i].h;
      const double w = x(8) * X + x(9) * Y + x(10) * Z + x(11);
      const double u = x(0) * X + x(1) * Y + x(2) * Z + x(3);
      const double v = x(4) * X + x(5) * Y + x(6) * Z + x(7);
      const double iw = 1.0 / w;
      const double uw2 = u * iw * iw, vw2 = v * iw * iw;
      J.row(2 * i) << X * iw, Y * iw, Z * iw, iw, 0, 0, 0, 0, -uw2 * X,
          -uw2 * Y, -uw2 * Z, -uw2;
      J.row(2 * i + 1) << 0, 0, 0, 0, X * iw, Y * iw, Z * iw, iw, -vw2 * X,
          -vw2 * Y, -vw2 * Z, -vw2;
    }
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd Jtr = J.transpose() * r;
    Eigen::Matrix<double, 12, 12> Aug = JtJ;
    for (int d = 0; d < 12; ++d) Aug(d, d) *= (1.0 + lambda);
    const Eigen::Matrix<double, 12, 1> dx = Aug.ldlt().solve(-Jtr);
    Eigen::Matrix<double, 12, 1> xt = x + dx;
    {
      const double rn =
          std::sqrt(xt(8) * xt(8) + xt(9) * xt(9) + xt(10) * xt(10));
      if (rn > 1e-18) xt /= rn;
    }
    Eigen::VectorXd rt;
    residuals(xt, rt);
    const double ct = rt.squaredNorm();
    if (ct < cost) {
      const bool converged = (cost - ct) < 1e-14 * (cost + 1e-30);
      x = xt;
      r = rt;
      cost = ct;
      lambda = std::max(lambda * 0.3, 1e-12);
      if (converged) break;
    } else {
      lambda *= 10.0;
      if (lambda > 1e8) break;
    }
  }
  for (int r2 = 0; r2 < 3; ++r2)
    for (int c = 0; c < 4; ++c) P[r2][c] = x(r2 * 4 + c);
}

}  // namespace

FitReport fitting_error_report(const RpcModel& m, const ProjectionMatrix& P,
                               const PixelRect& patch, double h_min,
                               double h_max, const GridSpec3& grid) {
  FitReport rep;
  rep.patch = patch;
  rep.grid_nx = grid.nx;
  rep.grid_ny = grid.ny;
  rep.cell_err.assign(static_cast<size_t>(grid.nx) * grid.ny, 0.0);
  rep.min_err = std::numeric_limits<double>::infinity();
  double sum = 0.0, sum_sq = 0.0;
  int count = 0;
  for (int iy = 0; iy < grid.ny; ++iy)
    for (int ix = 0; ix < grid.nx; ++ix) {
      double cell = 0.0;
      for (int iz = 0; iz < grid.nz; ++iz) {
        const double s = patch.x + patch.w * (grid.nx == 1
                                                  ? 0.5
                                                  : double(ix) / (grid.nx - 1));
        const double l = patch.y + patch.h * (grid.ny == 1
                                                  ? 0.5
                                                  : double(iy) / (grid.ny - 1));
        const double h =
            h_min + (h_max - h_min) *
                        (grid.nz == 1 ? 0.5 : double(iz) / (grid.nz - 1));
        const GroundPoint g = localize_iterative(m, {s, l}, h, 1e-9);
        const UtmCoord u = geodetic_to_utm(g.lat, g.lon, P.zone, P.south);
        const ImagePoint q = P.project_local(u.easting - P.origin_e,
                                             u.northing - P.origin_n, h);
        const double err = std::hypot(q.samp - s, q.line - l);
        cell = std::max(cell, err);
        rep.min_err = std::min(rep.min_err, err);
        rep.max_err = std::max(rep.max_err, err);
        sum += err;
        sum_sq += err * err;
        ++count;
      }
      rep.cell_err[static_cast<size_t>(iy) * grid.nx + ix] = cell;
    }
  rep.mean_err = sum / count;
  rep.rms_err = std::sqrt(sum_sq / count);
  return rep;
}

PinholeFitResult fit_pinhole(const RpcModel& m, const PixelRect& patch,
                             double h_min, double h_max,
                             const PinholeFitOptions& opt) {
  if (static_cast<long long>(opt.fit_grid.nx) * opt.fit_grid.ny *
          opt.fit_grid.nz <
      6)
    throw Error("pinhole fit: fewer than 6 virtual control points");
  if (opt.fit_grid.nz < 2 || !(h_max > h_min))
    throw Error("pinhole fit: degenerate (coplanar) control configuration");

  PinholeFitResult out;
  out.P.zone =
      opt.utm_zone > 0 ? opt.utm_zone : utm_zone_from_longitude(m.lon_off);
  out.P.south = m.lat_off < 0.0;

  // centroid of the patch at mid-height anchors the local frame
  {
    const GroundPoint g =
        localize_iterative(m, {patch.x + patch.w / 2, patch.y + patch.h / 2},
                           0.5 * (h_min + h_max), 1e-9);
    const UtmCoord u = geodetic_to_utm(g.lat, g.lon, out.P.zone, out.P.south);
    out.P.origin_e = u.easting;
    out.P.origin_n = u.northing;
  }

  const std::vector<ControlPoint> pts =
      make_control_points(m, patch, h_min, h_max, opt.fit_grid, out.P.zone,
                          out.P.south, out.P.origin_e, out.P.origin_n);
  solve_dlt(pts, out.P.p);
  if (opt.refine) refine_lm(pts, out.P.p);
  out.report =
      fitting_error_report(m, out.P, patch, h_min, h_max, opt.check_grid);
  return out;
}

std::array<double, 9> homography_for_plane(const ProjectionMatrix& P_ref,
                                           const ProjectionMatrix& P_src,
                                           double hei) {
  // points on the plane Z = hei: X = (x, y, hei, 1), so each camera reduces
  // to a 3x3 map of (x, y, 1)
  auto plane_map = [&](const ProjectionMatrix& P) {
    Eigen::Matrix3d H;
    for (int r = 0; r < 3; ++r) {
      H(r, 0) = P.p[r][0];
      H(r, 1) = P.p[r][1];
      H(r, 2) = P.p[r][2] * hei + P.p[r][3];
    }
    return H;
  };
  const Eigen::Matrix3d Hr = plane_map(P_ref);
  const Eigen::Matrix3d Hs = plane_map(P_src);
  if (std::fabs(Hr.determinant()) < 1e-12 * std::pow(Hr.norm(), 3))
    throw Error("homography: plane passes through the reference camera center");
  if (std::fabs(Hs.determinant()) < 1e-12 * std::pow(Hs.norm(), 3))
    throw Error("homography: plane passes through the source camera center");
  const Eigen::Matrix3d H = Hs * Hr.inverse();
  std::array<double, 9> out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out[r * 3 + c] = H(r, c);
  return out;
}

ImagePoint apply_homography(const std::array<double, 9>& H,
                            const ImagePoint& q) {
  const double w = H[6] * q.samp + H[7] * q.line + H[8];
  if (std::fabs(w) < 1e-15) throw Error("homography: point at infinity");
  return {(H[0] * q.samp + H[1] * q.line + H[2]) / w,
          (H[3] * q.samp + H[4] * q.line + H[5]) / w};
}

void write_fit_report_json(const FitReport& r, const std::string& path) {
  nlohmann::json j;
  j["patch"] = {{"x", r.patch.x},
                {"y", r.patch.y},
                {"w", r.patch.w},
                {"h", r.patch.h}};
  j["min_err_px"] = r.min_err;
  j["max_err_px"] = r.max_err;
  j["mean_err_px"] = r.mean_err;
  j["rms_err_px"] = r.rms_err;
  j["grid"] = {{"nx", r.grid_nx}, {"ny", r.grid_ny}};
  std::ofstream out(path);
  if (!out) throw Error("cannot write fit report: " + path);
  out << j.dump(2) << "\n";
}

void write_fit_report_csv(const FitReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write fit report: " + path);
  out << "x,y,err\n";
  char buf[96];
  for (int iy = 0; iy < r.grid_ny; ++iy)
    for (int ix = 0; ix < r.grid_nx; ++ix) {
      const double x =
          r.patch.x +
          r.patch.w * (r.grid_nx == 1 ? 0.5 : double(ix) / (r.grid_nx - 1));
      const double y =
          r.patch.y +
          r.patch.h * (r.grid_ny == 1 ? 0.5 : double(iy) / (r.grid_ny - 1));
      std::snprintf(buf, sizeof(buf), "%.3f,%.3f,%.9g\n", x, y,
                    r.cell_err[static_cast<size_t>(iy) * r.grid_nx + ix]);
      out << buf;
    }
}

}  // namespace satsweep
