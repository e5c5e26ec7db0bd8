#include "satsweep/rpc_model.h"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace satsweep {

const int kPoly20Exp[20][3] = {
    {0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0},
    {1, 0, 1}, {0, 1, 1}, {2, 0, 0}, {0, 2, 0}, {0, 0, 2},
    {1, 1, 1}, {3, 0, 0}, {1, 2, 0}, {1, 0, 2}, {2, 1, 0},
    {0, 3, 0}, {0, 1, 2}, {2, 0, 1}, {0, 2, 1}, {0, 0, 3},
};

static void poly20_terms(double x, double y, double z, double t[20]) {
  t[0] = 1.0;
  t[1] = x;
  t[2] = y;
  t[3] = z;
  t[4] = x * y;
  t[5] = x * z;
  t[6] = y * z;
  t[7] = x * x;
  t[8] = y * y;
  t[9] = z * z;
  t[10] = x * y * z;
  t[11] = x * x * x;
  t[12] = x * y * y;
  t[13] = x * z * z;
  t[14] = x * x * y;
  t[15] = y * y * y;
  t[16] = y * z * z;
  t[17] = x * x * z;
  t[18] = y * y * z;
  t[19] = z * z * z;
}

double eval_poly20(const Poly20& p, double x, double y, double z) {
  double t[20];
  poly20_terms(x, y, z, t);
  double sum = 0.0;
  for (int i = 0; i < 20; ++i) sum += p.c[i] * t[i];
  return sum;
}

void eval_poly20_gradient(const Poly20& p, double x, double y, double z,
                          double grad[3]) {
  // d(term)/dx, d(term)/dy, d(term)/dz for the 20 terms
  const double dx[20] = {0, 1, 0, 0, y, z, 0, 2 * x, 0, 0,
                         y * z, 3 * x * x, y * y, z * z, 2 * x * y,
                         0, 0, 2 * x * z, 0, 0};
  const double dy[20] = {0, 0, 1, 0, x, 0, z, 0, 2 * y, 0,
                         x * z, 0, 2 * x * y, 0, x * x,
                         3 * y * y, z * z, 0, 2 * y * z, 0};
  const double dz[20] = {0, 0, 0, 1, 0, x, y, 0, 0, 2 * z,
                         x * y, 0, 0, 2 * x * z, 0,
                         0, 2 * y * z, x * x, y * y, 3 * z * z};
  grad[0] = grad[1] = grad[2] = 0.0;
  for (int i = 0; i < 20; ++i) {
    grad[0] += p.c[i] * dx[i];
    grad[1] += p.c[i] * dy[i];
    grad[2] += p.c[i] * dz[i];
  }
}

NormalizedGround normalize_ground(const RpcModel& m, const GroundPoint& p) {
  return {(p.lat - m.lat_off) / m.lat_scale,
          (p.lon - m.lon_off) / m.lon_scale,
          (p.hei - m.hei_off) / m.hei_scale};
}

GroundPoint denormalize_ground(const RpcModel& m, const NormalizedGround& n) {
  return {n.lat_n * m.lat_scale + m.lat_off,
          n.lon_n * m.lon_scale + m.lon_off,
          n.hei_n * m.hei_scale + m.hei_off};
}

NormalizedImage normalize_image(const RpcModel& m, const ImagePoint& q) {
  return {(q.samp - m.samp_off) / m.samp_scale,
          (q.line - m.line_off) / m.line_scale};
}

ImagePoint denormalize_image(const RpcModel& m, const NormalizedImage& n) {
  return {n.samp_n * m.samp_scale + m.samp_off,
          n.line_n * m.line_scale + m.line_off};
}

ImagePoint project_forward(const RpcModel& m, const GroundPoint& p) {
  const NormalizedGround n = normalize_ground(m, p);
  const double sd = eval_poly20(m.samp_den, n.lon_n, n.lat_n, n.hei_n);
  const double ld = eval_poly20(m.line_den, n.lon_n, n.lat_n, n.hei_n);
  if (std::fabs(sd) < kDenominatorEps || std::fabs(ld) < kDenominatorEps)
    throw Error("degenerate projection: forward denominator below threshold");
  const double sn = eval_poly20(m.samp_num, n.lon_n, n.lat_n, n.hei_n);
  const double ln = eval_poly20(m.line_num, n.lon_n, n.lat_n, n.hei_n);
  return denormalize_image(m, {sn / sd, ln / ld});
}

void forward_jacobian_normalized(const RpcModel& m, const NormalizedGround& n,
                                 double J[4]) {
  // quotient rule on samp_n = N_s/D_s and line_n = N_l/D_l; polynomial
  // arguments are (L, P, H) = (lon_n, lat_n, hei_n), so d/dlat_n is the
  // y-slot and d/dlon_n the x-slot of the gradient.
  const double x = n.lon_n, y = n.lat_n, z = n.hei_n;
  const double ns = eval_poly20(m.samp_num, x, y, z);
  const double ds = eval_poly20(m.samp_den, x, y, z);
  const double nl = eval_poly20(m.line_num, x, y, z);
  const double dl = eval_poly20(m.line_den, x, y, z);
  double gns[3], gds[3], gnl[3], gdl[3];
  eval_poly20_gradient(m.samp_num, x, y, z, gns);
  eval_poly20_gradient(m.samp_den, x, y, z, gds);
  eval_poly20_gradient(m.line_num, x, y, z, gnl);
  eval_poly20_gradient(m.line_den, x, y, z, gdl);
  const double ds2 = ds * ds, dl2 = dl * dl;
  // rows: samp_n, line_n; cols: lat_n (y-slot), lon_n (x-slot)
  J[0] = (gns[1] * ds - ns * gds[1]) / ds2;
  J[1] = (gns[0] * ds - ns * gds[0]) / ds2;
  J[2] = (gnl[1] * dl - nl * gdl[1]) / dl2;
  J[3] = (gnl[0] * dl - nl * gdl[0]) / dl2;
}

GroundPoint localize_iterative(const RpcModel& m, const ImagePoint& q,
                               double hei, double tol_px) {
  const NormalizedImage target = normalize_image(m, q);
  const double hei_n = (hei - m.hei_off) / m.hei_scale;
  const double tol_n =
      tol_px / std::min(m.samp_scale, m.line_scale);  // conservative

  double lat_n = 0.0, lon_n = 0.0;

  auto residual = [&](double la, double lo, double r[2]) -> bool {
    const double sd = eval_poly20(m.samp_den, lo, la, hei_n);
    const double ld = eval_poly20(m.line_den, lo, la, hei_n);
    if (std::fabs(sd) < kDenominatorEps || std::fabs(ld) < kDenominatorEps)
      return false;
    r[0] = eval_poly20(m.samp_num, lo, la, hei_n) / sd - target.samp_n;
    r[1] = eval_poly20(m.line_num, lo, la, hei_n) / ld - target.line_n;
    return true;
  };

  double r[2];
  if (!residual(lat_n, lon_n, r))
    throw Error("localization failure: degenerate denominator at start");
  double err = std::hypot(r[0], r[1]);

  for (int iter = 0; iter < 50; ++iter) {
    if (err < tol_n) {
      return denormalize_ground(m, {lat_n, lon_n, hei_n});
    }
    double J[4];
    forward_jacobian_normalized(m, {lat_n, lon_n, hei_n}, J);
    const double det = J[0] * J[3] - J[1] * J[2];
    if (std::fabs(det) < 1e-18)
      throw Error("localization failure: singular Jacobian");
    double dlat = -(J[3] * r[0] - J[1] * r[1]) / det;
    double dlon = -(-J[2] * r[0] + J[0] * r[1]) / det;

    // backtracking line search keeps the iteration stable far from the cube
    double step = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 8; ++bt) {
      const double la = lat_n + step * dlat;
      const double lo = lon_n + step * dlon;
      double rt[2];
      if (residual(la, lo, rt)) {
        const double et = std::hypot(rt[0], rt[1]);
        if (et < err) {
          lat_n = la;
          lon_n = lo;
          r[0] = rt[0];
          r[1] = rt[1];
          err = et;
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted)
      throw Error("localization failure: no descent step");
    if (std::fabs(lat_n) > 100.0 || std::fabs(lon_n) > 100.0)
      throw Error("localization failure: diverged outside model domain");
  }
  if (err < tol_n) return denormalize_ground(m, {lat_n, lon_n, hei_n});
  throw Error("localization failure: no convergence in 50 iterations");
}

GroundPoint localize_inverse_fitted(const RpcModel& m, const ImagePoint& q,
                                    double hei) {
  if (!m.has_inverse)
    throw Error("inverse coefficients absent");
  const NormalizedImage n = normalize_image(m, q);
  const double hei_n = (hei - m.hei_off) / m.hei_scale;
  const double latd = eval_poly20(m.inv_lat_den, n.samp_n, n.line_n, hei_n);
  const double lond = eval_poly20(m.inv_lon_den, n.samp_n, n.line_n, hei_n);
  if (std::fabs(latd) < kDenominatorEps || std::fabs(lond) < kDenominatorEps)
    throw Error("degenerate inverse denominator");
  const double lat_n =
      eval_poly20(m.inv_lat_num, n.samp_n, n.line_n, hei_n) / latd;
  const double lon_n =
      eval_poly20(m.inv_lon_num, n.samp_n, n.line_n, hei_n) / lond;
  return denormalize_ground(m, {lat_n, lon_n, hei_n});
}

GroundPoint localize(const RpcModel& m, const ImagePoint& q, double hei) {
  if (m.has_inverse) return localize_inverse_fitted(m, q, hei);
  return localize_iterative(m, q, hei);
}

InverseFitReport fit_inverse_rpc(RpcModel& m, const GridSpec3& grid) {
  if (grid.nx < 2 || grid.ny < 2 || grid.nz < 2)
    throw Error("inverse fit failure: grid must have at least 2 samples/axis");
  const int n_samples = grid.nx * grid.ny * grid.nz;
  if (n_samples < 39)
    throw Error("inverse fit failure: underdetermined sample grid");

  // samples over the normalized image x height cube [-1,1]^3
  std::vector<double> samp_n(n_samples), line_n(n_samples), hei_n(n_samples);
  std::vector<double> lat_n(n_samples), lon_n(n_samples);
  int k = 0;
  for (int iz = 0; iz < grid.nz; ++iz)
    for (int iy = 0; iy < grid.ny; ++iy)
      for (int ix = 0; ix < grid.nx; ++ix, ++k) {
        samp_n[k] = -1.0 + 2.0 * ix / (grid.nx - 1);
        line_n[k] = -1.0 + 2.0 * iy / (grid.ny - 1);
        hei_n[k] = -1.0 + 2.0 * iz / (grid.nz - 1);
        const ImagePoint q =
            denormalize_image(m, {samp_n[k], line_n[k]});
        const double h = hei_n[k] * m.hei_scale + m.hei_off;
        const GroundPoint g = localize_iterative(m, q, h, 1e-9);
        const NormalizedGround ng = normalize_ground(m, g);
        lat_n[k] = ng.lat_n;
        lon_n[k] = ng.lon_n;
      }

  // For each output coordinate v: v = N(s,l,h)/D(s,l,h) with D's constant
  // term pinned to 1, rearranged to the linear system
  //   sum_t n_t T_t - v * sum_{t>=1} d_t T_t = v.
  auto fit_one = [&](const std::vector<double>& v, Poly20& num, Poly20& den) {
    Eigen::MatrixXd A(n_samples, 39);
    Eigen::VectorXd b(n_samples);
    for (int i = 0; i < n_samples; ++i) {
      double t[20];
      poly20_terms(samp_n[i], line_n[i], hei_n[i], t);
      for (int j = 0; j < 20; ++j) A(i, j) = t[j];
      for (int j = 1; j < 20; ++j) A(i, 20 + j - 1) = -v[i] * t[j];
      b(i) = v[i];
    }
    // Rank-revealing solve: targets that are exactly polynomial make the
    // denominator columns dependent on the numerator ones, which is a
    // legitimate redundancy, not a failure. The threshold zeroes the
    // redundant directions instead of amplifying them.
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-10);
    if (qr.rank() < 20)
      throw Error("inverse fit failure: rank-deficient normal system");
    Eigen::VectorXd x = qr.solve(b);
    for (int j = 0; j < 20; ++j) num.c[j] = x(j);
    den.c[0] = 1.0;
    for (int j = 1; j < 20; ++j) den.c[j] = x(20 + j - 1);
  };

  fit_one(lat_n, m.inv_lat_num, m.inv_lat_den);
  fit_one(lon_n, m.inv_lon_num, m.inv_lon_den);
  m.has_inverse = true;

  // residuals on an independent (midpoint-offset, denser) check grid
  InverseFitReport rep;
  double sum_sq = 0.0;
  int count = 0;
  const int cx = 2 * grid.nx - 1, cy = 2 * grid.ny - 1, cz = 2 * grid.nz - 1;
  for (int iz = 0; iz < cz; ++iz)
    for (int iy = 0; iy < cy; ++iy)
      for (int ix = 0; ix < cx; ++ix) {
        const double sn = -1.0 + 2.0 * ix / (cx - 1);
        const double ln = -1.0 + 2.0 * iy / (cy - 1);
        const double hn = -1.0 + 2.0 * iz / (cz - 1);
        const ImagePoint q = denormalize_image(m, {sn, ln});
        const double h = hn * m.hei_scale + m.hei_off;
        const GroundPoint truth = localize_iterative(m, q, h, 1e-9);
        const GroundPoint fitted = localize_inverse_fitted(m, q, h);
        const NormalizedGround tn = normalize_ground(m, truth);
        const NormalizedGround fn = normalize_ground(m, fitted);
        const double res = std::hypot(tn.lat_n - fn.lat_n, tn.lon_n - fn.lon_n);
        rep.max_residual_norm = std::max(rep.max_residual_norm, res);
        sum_sq += res * res;
        ++count;
        const ImagePoint back = project_forward(m, fitted);
        const double px = std::hypot(back.samp - q.samp, back.line - q.line);
        rep.max_residual_px = std::max(rep.max_residual_px, px);
      }
  rep.rms_residual_norm = std::sqrt(sum_sq / count);
  return rep;
}

// ---------------------------------------------------------------------------
// text format

namespace {

const char* kScalarKeys[] = {
    "LINE_OFF", "SAMP_OFF", "LAT_OFF", "LONG_OFF", "HEIGHT_OFF",
    "LINE_SCALE", "SAMP_SCALE", "LAT_SCALE", "LONG_SCALE", "HEIGHT_SCALE",
};

struct CoeffBlock {
  const char* prefix;
  Poly20 RpcModel::* field;
  bool inverse;
};

const CoeffBlock kCoeffBlocks[] = {
    {"LINE_NUM_COEFF", &RpcModel::line_num, false},
    {"LINE_DEN_COEFF", &RpcModel::line_den, false},
    {"SAMP_NUM_COEFF", &RpcModel::samp_num, false},
    {"SAMP_DEN_COEFF", &RpcModel::samp_den, false},
    {"INV_LAT_NUM_COEFF", &RpcModel::inv_lat_num, true},
    {"INV_LAT_DEN_COEFF", &RpcModel::inv_lat_den, true},
    {"INV_LON_NUM_COEFF", &RpcModel::inv_lon_num, true},
    {"INV_LON_DEN_COEFF", &RpcModel::inv_lon_den, true},
};

double parse_number(const std::string& key, const std::string& text) {
  try {
    size_t pos = 0;
    const double v = std::stod(text, &pos);
    // allow a trailing unit suffix ("pixels", "degrees", "meters")
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos < text.size()) {
      for (size_t i = pos; i < text.size(); ++i)
        if (!std::isalpha(static_cast<unsigned char>(text[i])) &&
            !std::isspace(static_cast<unsigned char>(text[i])))
          throw Error("non-numeric value for key " + key + ": '" + text + "'");
    }
    return v;
  } catch (const std::invalid_argument&) {
    throw Error("non-numeric value for key " + key + ": '" + text + "'");
  } catch (const std::out_of_range&) {
    throw Error("non-numeric value for key " + key + ": '" + text + "'");
  }
}

}  // namespace

RpcModel parse_rpc(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string linebuf;
  while (std::getline(in, linebuf)) {
    const size_t colon = linebuf.find(':');
    if (colon == std::string::npos) continue;
    std::string key = linebuf.substr(0, colon);
    std::string val = linebuf.substr(colon + 1);
    auto trim = [](std::string& s) {
      const char* ws = " \t\r\n";
      const size_t b = s.find_first_not_of(ws);
      const size_t e = s.find_last_not_of(ws);
      s = (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
    };
    trim(key);
    trim(val);
    if (!key.empty()) kv[key] = val;
  }

  auto require = [&](const std::string& key) -> double {
    auto it = kv.find(key);
    if (it == kv.end()) throw Error("missing key " + key);
    return parse_number(key, it->second);
  };

  RpcModel m;
  m.line_off = require("LINE_OFF");
  m.samp_off = require("SAMP_OFF");
  m.lat_off = require("LAT_OFF");
  m.lon_off = require("LONG_OFF");
  m.hei_off = require("HEIGHT_OFF");
  m.line_scale = require("LINE_SCALE");
  m.samp_scale = require("SAMP_SCALE");
  m.lat_scale = require("LAT_SCALE");
  m.lon_scale = require("LONG_SCALE");
  m.hei_scale = require("HEIGHT_SCALE");

  auto read_block = [&](const char* prefix, Poly20& poly) -> int {
    int found = 0;
    for (int i = 0; i < 20; ++i) {
      const std::string key = std::string(prefix) + "_" + std::to_string(i + 1);
      auto it = kv.find(key);
      if (it == kv.end()) continue;
      poly.c[i] = parse_number(key, it->second);
      ++found;
    }
    return found;
  };

  for (const CoeffBlock& blk : kCoeffBlocks) {
    const int found = read_block(blk.prefix, m.*blk.field);
    if (!blk.inverse) {
      if (found != 20)
        throw Error(std::string("coefficient count for ") + blk.prefix +
                    ": expected 20, found " + std::to_string(found));
    } else if (found == 20) {
      m.has_inverse = true;
    } else if (found != 0) {
      throw Error(std::string("coefficient count for ") + blk.prefix +
                  ": expected 20, found " + std::to_string(found));
    }
  }
  if (m.has_inverse) {
    for (const CoeffBlock& blk : kCoeffBlocks)
      if (blk.inverse && read_block(blk.prefix, m.*blk.field) != 20)
        throw Error(std::string("coefficient count for ") + blk.prefix +
                    ": incomplete inverse block");
  }

  if (kv.count("HEIGHT_MIN") && kv.count("HEIGHT_MAX")) {
    m.height_min = parse_number("HEIGHT_MIN", kv["HEIGHT_MIN"]);
    m.height_max = parse_number("HEIGHT_MAX", kv["HEIGHT_MAX"]);
  } else {
    m.height_min = m.hei_off - m.hei_scale;
    m.height_max = m.hei_off + m.hei_scale;
  }

  validate_rpc(m);
  return m;
}

RpcModel parse_rpc(const std::string& text) {
  std::istringstream in(text);
  return parse_rpc(in);
}

RpcModel parse_rpc_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open RPC file: " + path);
  return parse_rpc(in);
}

void validate_rpc(const RpcModel& m) {
  if (m.line_scale <= 0 || m.samp_scale <= 0 || m.lat_scale <= 0 ||
      m.lon_scale <= 0 || m.hei_scale <= 0)
    throw Error("invalid RPC: scales must be strictly positive");
  if (!(m.height_min < m.height_max))
    throw Error("invalid RPC: height_min must be below height_max");
  // forward denominators must stay away from zero over the normalized cube
  for (int iz = -2; iz <= 2; ++iz)
    for (int iy = -2; iy <= 2; ++iy)
      for (int ix = -2; ix <= 2; ++ix) {
        const double x = ix / 2.0, y = iy / 2.0, z = iz / 2.0;
        if (std::fabs(eval_poly20(m.samp_den, x, y, z)) < kDenominatorEps ||
            std::fabs(eval_poly20(m.line_den, x, y, z)) < kDenominatorEps)
          throw Error("invalid RPC: forward denominator vanishes in cube");
      }
}

static void append_number(std::string& out, const char* key, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += key;
  out += ": ";
  out += buf;
  out += "\n";
}

std::string serialize_rpc(const RpcModel& m) {
  std::string out;
  const double scalars[] = {m.line_off, m.samp_off, m.lat_off, m.lon_off,
                            m.hei_off,  m.line_scale, m.samp_scale,
                            m.lat_scale, m.lon_scale, m.hei_scale};
  for (int i = 0; i < 10; ++i) append_number(out, kScalarKeys[i], scalars[i]);
  append_number(out, "HEIGHT_MIN", m.height_min);
  append_number(out, "HEIGHT_MAX", m.height_max);
  for (const CoeffBlock& blk : kCoeffBlocks) {
    if (blk.inverse && !m.has_inverse) continue;
    const Poly20& poly = m.*blk.field;
    for (int i = 0; i < 20; ++i) {
      const std::string key = std::string(blk.prefix) + "_" + std::to_string(i + 1);
      append_number(out, key.c_str(), poly.c[i]);
    }
  }
  return out;
}

void write_rpc_file(const RpcModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write RPC file: " + path);
  out << serialize_rpc(m);
}

}  // namespace satsweep
