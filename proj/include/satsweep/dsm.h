#pragma once

#include <string>
#include <vector>

namespace satsweep {

// Regular UTM-grid height raster. Values are stored row-major with row 0 at
// the northern edge (ESRI ASCII convention); (xll, yll) is the lower-left
// corner of the grid.
struct Dsm {
  int zone = 0;
  bool south = false;
  double xll = 0.0, yll = 0.0;  // meters
  double cell = 5.0;            // meters
  int rows = 0, cols = 0;
  double nodata = -9999.0;
  std::vector<double> values;

  double& at(int r, int c) { return values[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return values[static_cast<size_t>(r) * cols + c];
  }
  bool is_nodata(double v) const { return v == nodata; }

  // cell center in UTM meters
  double center_e(int c) const { return xll + (c + 0.5) * cell; }
  double center_n(int r) const { return yll + (rows - 1 - r + 0.5) * cell; }

  // cell indices containing a UTM point; false when outside the grid
  bool cell_of(double e, double n, int& r, int& c) const;
};

struct DsmMetrics {
  double mae = 0.0;           // meters
  double rmse = 0.0;          // meters
  double pct_below_2_5 = 0.0; // percent
  double pct_below_7_5 = 0.0; // percent
  double completeness = 0.0;  // percent
};

// MAE/RMSE and threshold percentages over cells valid in both grids after
// nearest-cell alignment of the estimate onto the ground-truth grid;
// completeness is the share of gt-valid cells that carry an estimate.
// Throws when the grids share no valid overlap.
DsmMetrics evaluate_dsm(const Dsm& est, const Dsm& gt);

// ESRI ASCII grid (ncols/nrows/xllcorner/yllcorner/cellsize/NODATA_value)
// plus a JSON sidecar <path>.json carrying the UTM zone.
Dsm read_esri_grid(const std::string& path);
void write_esri_grid(const Dsm& dsm, const std::string& path);

std::string metrics_to_json(const DsmMetrics& m, double runtime_seconds);

}  // namespace satsweep
