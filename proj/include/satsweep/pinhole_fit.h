#pragma once

#include <array>
#include <string>
#include <vector>

#include "satsweep/geometry.h"
#include "satsweep/rpc_model.h"

namespace satsweep {

// 3x4 projective camera in a local Cartesian frame: axes (easting, northing,
// height) in meters, re-centered at origin_e/origin_n for conditioning.
// Normalized so the left 3x3 block's last row has unit norm.
struct ProjectionMatrix {
  double p[3][4] = {};
  double origin_e = 0.0, origin_n = 0.0;
  int zone = 0;
  bool south = false;

  // e/n are local (already re-centered) coordinates
  ImagePoint project_local(double e, double n, double h) const;
};

struct FitReport {
  double min_err = 0.0, max_err = 0.0, mean_err = 0.0, rms_err = 0.0;  // px
  PixelRect patch;
  int grid_nx = 0, grid_ny = 0;
  std::vector<double> cell_err;  // row-major ny x nx, max over heights
};

struct PinholeFitOptions {
  GridSpec3 fit_grid{10, 10, 10};
  GridSpec3 check_grid{20, 20, 20};
  bool refine = true;      // Levenberg-Marquardt polish after the DLT
  int utm_zone = 0;        // 0 = derive from model center
};

struct PinholeFitResult {
  ProjectionMatrix P;
  FitReport report;
};

// Fits a pin-hole camera to the RPC over patch x [h_min, h_max]: virtual
// control points from Newton localization on an image grid, ground converted
// to local UTM meters, normalized DLT, optional LM refinement. The report is
// computed on the denser independent check grid. Throws on degenerate
// (coplanar) control configurations.
PinholeFitResult fit_pinhole(const RpcModel& m, const PixelRect& patch,
                             double h_min, double h_max,
                             const PinholeFitOptions& opt = {});

// Reprojection discrepancy of P against the RPC over an independent grid;
// cell_err is the per-cell max over the height samples (patch X/Y raster).
FitReport fitting_error_report(const RpcModel& m, const ProjectionMatrix& P,
                               const PixelRect& patch, double h_min,
                               double h_max, const GridSpec3& check_grid);

// Plane-induced homography for the horizontal plane Z = hei, mapping
// reference pixels to source pixels. Both cameras must share the local
// frame. Throws when the plane passes through either camera center.
std::array<double, 9> homography_for_plane(const ProjectionMatrix& P_ref,
                                           const ProjectionMatrix& P_src,
                                           double hei);

ImagePoint apply_homography(const std::array<double, 9>& H,
                            const ImagePoint& q);

void write_fit_report_json(const FitReport& r, const std::string& path);
void write_fit_report_csv(const FitReport& r, const std::string& path);

}  // namespace satsweep
