#pragma once

#include <cstdint>
#include <vector>

#include "satsweep/geometry.h"
#include "satsweep/raster.h"
#include "satsweep/rpc_model.h"

namespace satsweep {

// Symmetric 4x4x4 tensor encoding one 20-term cubic polynomial. The four
// slots are (1, first var, second var, height); lower-degree terms are
// carried by the constant slot. Entry weights: all indices equal -> a,
// exactly two equal -> a/3, all distinct -> a/6, where a is the coefficient
// of the matching monomial. A single contraction with a point tensor
// (1, u, v, h) then reproduces the polynomial value.
struct CoeffTensor {
  double t[4][4][4] = {};
};

// Rank-1 point tensor (1, u, v, h); x[0] must stay 1.
struct PointTensor {
  double x[4] = {1.0, 0.0, 0.0, 0.0};
};

CoeffTensor build_coeff_tensor(const Poly20& p);

// f = T_ijk x_i x_j x_k. Evaluated as a multiply-accumulate over the 20
// distinct index multisets (valid because CoeffTensor is symmetric); the
// reduction order is fixed, so results are deterministic.
double contract(const CoeffTensor& t, const PointTensor& x);

// Batched contraction: one tensor per batch element, points laid out as
// points[(b*point_count + m)*4 + i]. out[b*point_count + m] = T^(b) : X^(bm).
// Per-point arithmetic is identical to contract(), so the result is bitwise
// independent of chunking or thread count.
void contract_batch(const std::vector<CoeffTensor>& tensors,
                    const std::vector<double>& points, int batch_count,
                    int point_count, std::vector<double>& out,
                    int threads = 1);

// Same, with a single point set shared by every batch element
// (points[m*4 + i]).
void contract_batch_shared(const std::vector<CoeffTensor>& tensors,
                           const std::vector<double>& points, int point_count,
                           std::vector<double>& out, int threads = 1);

// The eight tensors of one warping direction: inverse of the view being
// localized from, forward of the view being projected into.
struct WarpTensors {
  CoeffTensor inv_lat_num, inv_lat_den, inv_lon_num, inv_lon_den;
  CoeffTensor samp_num, samp_den, line_num, line_den;
};

// Per-pixel target coordinates of a warped grid plus in-bounds mask.
struct CoordMap {
  int width = 0, height = 0;
  std::vector<double> samp, line;   // target pixels, full-image frame
  std::vector<uint8_t> valid;

  size_t size() const { return samp.size(); }
};

// Maps a source-view pixel onto the reference view through the plane at
// height hei (meters): source inverse contraction to ground, reference
// forward contraction to pixels, with de/re-normalization between the two
// models' parameter sets. src must carry inverse coefficients. Throws when
// hei is outside either model's height range or a denominator degenerates.
ImagePoint warp_point(const RpcModel& src, const RpcModel& ref,
                      const ImagePoint& q_s, double hei);

// Analytic derivative of warp_point with respect to hei (px per meter),
// by quotient-rule differentiation of the contraction chain.
void jacobian_wrt_height(const RpcModel& src, const RpcModel& ref,
                         const ImagePoint& q_s, double hei,
                         double& dsamp_dhei, double& dline_dhei);

// Gather-form grid warp: for every pixel of ref_rect (reference view), the
// matching source-view coordinates on the plane at hei, computed through the
// batched contraction. ref must carry inverse coefficients. The mask flags
// pixels whose target lands outside src_bounds; a plane that misses the
// source entirely yields an all-false mask, not an error.
CoordMap warp_grid(const RpcModel& src, const RpcModel& ref,
                   const PixelRect& ref_rect, double hei,
                   const PixelRect& src_bounds, int threads = 1);

// warp_grid with a per-pixel height field (row-major over ref_rect).
CoordMap warp_grid_heights(const RpcModel& src, const RpcModel& ref,
                           const PixelRect& ref_rect,
                           const std::vector<double>& heights,
                           const PixelRect& src_bounds, int threads = 1);

// Lower-level list form: warps arbitrary pixel positions of the `from` view
// (which must carry inverse coefficients) into the `to` view at per-point
// heights. valid = the contraction chain stayed non-degenerate; no bounds
// masking. The returned CoordMap has width = point count, height = 1.
CoordMap warp_points_map(const RpcModel& from, const RpcModel& to,
                         const std::vector<double>& samp,
                         const std::vector<double>& line,
                         const std::vector<double>& heights, int threads = 1);

// Bilinear gather of img at map coordinates (already in img's pixel frame).
// out_mask is false where the map is invalid or any of the 4 support pixels
// falls outside the raster.
void resample_bilinear(const RasterF& img, const CoordMap& map, RasterF& out,
                       std::vector<uint8_t>& out_mask, int threads = 1);

}  // namespace satsweep
