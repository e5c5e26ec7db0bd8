#pragma once

#include <memory>
#include <string>
#include <vector>

#include "satsweep/dsm.h"
#include "satsweep/geometry.h"
#include "satsweep/raster.h"
#include "satsweep/rpc_model.h"
#include "satsweep/sweep.h"

namespace satsweep {

struct GeoBlock {
  int id = 0;
  LatLonRect bounds;
  double h_min = 0.0, h_max = 0.0;
};

// Supplies per-block height bounds for plane scheduling.
class ElevationSource {
 public:
  virtual ~ElevationSource() = default;
  virtual void height_bounds(const LatLonRect& block, double& h_min,
                             double& h_max) const = 0;
};

// Default: the intersection of the models' height ranges.
class RpcRangeSource : public ElevationSource {
 public:
  explicit RpcRangeSource(const std::vector<const RpcModel*>& models);
  void height_bounds(const LatLonRect& block, double& h_min,
                     double& h_max) const override;

 private:
  double h_min_, h_max_;
};

// Coarse-DEM override: an ASCII grid interpreted in geographic coordinates
// (xllcorner = lon, yllcorner = lat, cellsize in degrees). Per-block bounds
// are the DEM min/max over cells intersecting the block, padded by margin_m.
class DemElevationSource : public ElevationSource {
 public:
  DemElevationSource(const std::string& ascii_grid_path, double margin_m = 25);
  void height_bounds(const LatLonRect& block, double& h_min,
                     double& h_max) const override;

 private:
  Dsm grid_;  // reused container; coordinates are degrees here
  double margin_;
};

// Regular tiling of the AOI with edge blocks truncated; block_size is the
// target edge length in meters (converted to degrees at the AOI center).
std::vector<GeoBlock> block_partition(const LatLonRect& aoi,
                                      double block_size_m,
                                      const ElevationSource& elevation);

// Pixel crop of one view covering a block: bounding rectangle of the block's
// 8 corners projected at h_min and h_max, padded by pad_px.
struct CropSpec {
  int view = 0;
  int x = 0, y = 0, w = 0, h = 0;
};

CropSpec compute_crop(const RpcModel& m, const GeoBlock& block, double pad_px);

// Crops for all views of a block, extended to a uniform size (rounded up to
// a multiple of `multiple`) and shifted to stay inside each image.
std::vector<CropSpec> compute_uniform_crops(
    const std::vector<const RpcModel*>& models,
    const std::vector<std::pair<int, int>>& image_sizes, const GeoBlock& block,
    double pad_px, int multiple = 16);

// Cross-view geometric consistency: a reference pixel survives when, for at
// least min_consistent source views, the localize -> project -> lookup ->
// localize -> reproject round trip lands within threshold_px of the start.
// origins[i] is the full-image pixel position of map i's (0,0).
HeightMap geometric_consistency_filter(
    const std::vector<HeightMap>& maps, const std::vector<const RpcModel*>& rpcs,
    const std::vector<std::pair<double, double>>& origins, int ref_index,
    double threshold_px = 1.0, int min_consistent = 1, int threads = 1);

struct DsmGridSpec {
  int zone = 0;
  bool south = false;
  double cell = 5.0;
  double xll = 0.0, yll = 0.0;
  int rows = 0, cols = 0;
};

// Grid covering the AOI, cell-aligned (origin snapped to cell multiples).
DsmGridSpec make_dsm_grid(const LatLonRect& aoi, double cell,
                          int forced_zone = 0);

// Every valid height-map pixel becomes a UTM point (localize at its height);
// points are binned into cells and each cell takes the median.
Dsm fuse_dsm(const std::vector<HeightMap>& maps,
             const std::vector<const RpcModel*>& rpcs,
             const std::vector<std::pair<double, double>>& origins,
             const DsmGridSpec& grid);

struct PipelineView {
  RasterF image;
  RpcModel rpc;
};

struct PipelineConfig {
  SweepConfig sweep;
  double block_size_m = 4000.0;
  double pad_px = 32.0;
  double consistency_threshold_px = 1.0;
  int min_consistent_views = 1;
  double cell_size_m = 5.0;
  int utm_zone = 0;  // 0 = from the AOI center
  std::string dem_path;  // optional coarse DEM for block height bounds
  int threads = 1;
};

PipelineConfig load_pipeline_config(const std::string& json_path);

struct PipelineResult {
  Dsm dsm;
  bool has_metrics = false;
  DsmMetrics metrics;
  double runtime_seconds = 0.0;
  std::vector<std::string> block_errors;
  std::vector<HeightMap> ref_height_maps;           // last processed block
  std::vector<std::pair<double, double>> ref_origins;
};

// Full production pass: partition, crop, multi-stage sweep with every view
// as reference, consistency filter, per-block fusion, mosaic (overlap cells
// take the median across blocks), optional evaluation. Failing blocks are
// reported and skipped.
PipelineResult run_pipeline(const std::vector<PipelineView>& views,
                            const LatLonRect& aoi, const PipelineConfig& cfg,
                            const Dsm* ground_truth = nullptr);

}  // namespace satsweep
