#pragma once

#include <array>
#include <iosfwd>
#include <string>

#include "satsweep/geometry.h"

namespace satsweep {

// 20-coefficient cubic polynomial in three normalized variables, RPC00B term
// order: 1, L, P, H, LP, LH, PH, L2, P2, H2, LPH, L3, LP2, LH2, L2P, P3,
// PH2, L2H, P2H, H3. Forward polynomials take (L, P, H) =
// (lon_n, lat_n, hei_n); fitted inverse polynomials take (samp_n, line_n,
// hei_n) in the same slots.
struct Poly20 {
  std::array<double, 20> c{};
};

// Exponents of (x, y, z) for each of the 20 terms.
extern const int kPoly20Exp[20][3];

double eval_poly20(const Poly20& p, double x, double y, double z);

// Partial derivatives of eval_poly20 with respect to x, y, z.
void eval_poly20_gradient(const Poly20& p, double x, double y, double z,
                          double grad[3]);

struct NormalizedGround {
  double lat_n = 0.0, lon_n = 0.0, hei_n = 0.0;
};
struct NormalizedImage {
  double samp_n = 0.0, line_n = 0.0;
};

struct RpcModel {
  double line_off = 0.0, line_scale = 1.0;   // pixels
  double samp_off = 0.0, samp_scale = 1.0;   // pixels
  double lat_off = 0.0, lat_scale = 1.0;     // degrees
  double lon_off = 0.0, lon_scale = 1.0;     // degrees
  double hei_off = 0.0, hei_scale = 1.0;     // meters

  Poly20 samp_num, samp_den, line_num, line_den;  // forward, ground -> image

  bool has_inverse = false;
  Poly20 inv_lat_num, inv_lat_den, inv_lon_num, inv_lon_den;

  double height_min = 0.0, height_max = 0.0;  // valid elevation span, meters
};

// Denominator magnitudes below this (normalized space) are degenerate.
constexpr double kDenominatorEps = 1e-12;

// Parses the key:value RPC text format (LINE_OFF, ..., LINE_NUM_COEFF_1..20,
// optional INV_* blocks, optional HEIGHT_MIN/HEIGHT_MAX). Throws Error on
// missing keys, non-numeric values, or bad coefficient counts. The parsed
// model is validated (positive scales, non-vanishing forward denominators on
// a sample grid, height_min < height_max).
RpcModel parse_rpc(std::istream& in);
RpcModel parse_rpc(const std::string& text);
RpcModel parse_rpc_file(const std::string& path);

std::string serialize_rpc(const RpcModel& m);
void write_rpc_file(const RpcModel& m, const std::string& path);

// Construction-time invariant check; throws Error when violated.
void validate_rpc(const RpcModel& m);

NormalizedGround normalize_ground(const RpcModel& m, const GroundPoint& p);
GroundPoint denormalize_ground(const RpcModel& m, const NormalizedGround& n);
NormalizedImage normalize_image(const RpcModel& m, const ImagePoint& q);
ImagePoint denormalize_image(const RpcModel& m, const NormalizedImage& n);

// Ground -> image through the forward rational polynomials. Throws on a
// degenerate denominator.
ImagePoint project_forward(const RpcModel& m, const GroundPoint& p);

// d(samp, line)/d(lat_n, lon_n) of the normalized forward projection, used by
// the Newton localizer. J is row-major 2x2: rows (samp_n, line_n), columns
// (lat_n, lon_n).
void forward_jacobian_normalized(const RpcModel& m, const NormalizedGround& n,
                                 double J[4]);

// Image + height -> ground by damped Newton iteration on the forward model.
// Converges when the forward reprojection lands within tol_px pixels of q;
// throws Error after max 50 iterations or on divergence.
GroundPoint localize_iterative(const RpcModel& m, const ImagePoint& q,
                               double hei, double tol_px = 1e-8);

struct InverseFitReport {
  double max_residual_norm = 0.0;  // normalized ground units, check grid
  double rms_residual_norm = 0.0;
  double max_residual_px = 0.0;    // forward reprojection of fitted inverse
};

// Fits the four inverse polynomials by linear least squares over a grid of
// localize_iterative samples (denominator constant terms pinned to 1, 39
// unknowns per coordinate). Throws on a rank-deficient system.
InverseFitReport fit_inverse_rpc(RpcModel& m, const GridSpec3& grid = {});

// Image + height -> ground through the fitted inverse polynomials.
GroundPoint localize_inverse_fitted(const RpcModel& m, const ImagePoint& q,
                                    double hei);

// Fitted inverse when present, Newton fallback otherwise.
GroundPoint localize(const RpcModel& m, const ImagePoint& q, double hei);

}  // namespace satsweep
