#pragma once

#include <string>
#include <vector>

#include "satsweep/raster.h"
#include "satsweep/rpc_model.h"
#include "satsweep/tensor_warp.h"

namespace satsweep {

struct SweepStageSpec {
  int plane_count = 0;
  double interval = 0.0;  // meters; <= 0 means span/plane_count (stage 1)
};

struct SweepConfig {
  std::vector<int> pyramid_factors{16, 4, 1};  // scales 1/16, 1/4, 1
  std::vector<SweepStageSpec> stages{{64, 0.0}, {32, 5.0}, {8, 2.5}};
  int aggregation_radius = 2;
  // Softmax temperature for the height regression. Variance costs over
  // z-scored features land in [0, ~2]; 0.02 keeps sub-interval interpolation
  // between adjacent planes while giving far planes negligible weight.
  double temperature = 0.02;
  int min_valid_views = 2;  // reference counts as one
  int threads = 1;
};

struct HeightPlaneSchedule {
  struct Stage {
    int plane_count = 0;
    double interval = 0.0;         // meters, resolved
    bool center_on_previous = false;  // stage 1 sweeps the global range
  };
  double d_min = 0.0, d_max = 0.0;
  std::vector<Stage> stages;
};

// Resolves stage intervals against [d_min, d_max]: stage 1 keeps its fixed
// plane count with interval (d_max - d_min) / count over the global range;
// later stages keep their configured counts/intervals and re-center on the
// previous height map. Throws when d_min >= d_max.
HeightPlaneSchedule build_schedule(double d_min, double d_max,
                                   const SweepConfig& cfg);

// Refinement-stage hypothesis planes: `count` planes at `interval` spacing
// centered on `center`, each clamped into [d_min, d_max].
std::vector<double> centered_planes(double center, int count, double interval,
                                    double d_min, double d_max);

// Per-scale image features: channels {intensity, d/dx, d/dy}, each zero-mean
// unit-variance over the tile. Stands in for a learned extractor; the
// warping geometry under test is unchanged.
struct FeaturePyramid {
  struct Level {
    int factor = 1;       // full-resolution pixels per feature pixel
    RasterF channels;     // 3-channel
  };
  std::vector<Level> levels;
};

FeaturePyramid extract_features(const RasterF& gray,
                                const std::vector<int>& factors);

// One view entering a sweep: grayscale crop, its full-image RPC, crop origin.
struct SweepView {
  const RasterF* image = nullptr;
  const RpcModel* rpc = nullptr;
  double origin_x = 0.0, origin_y = 0.0;
};

// Hypothesis planes for one stage: one shared list, or per-pixel heights at
// the stage's feature resolution (layout (d*H + y)*W + x).
struct StagePlanes {
  int count = 0;
  bool per_pixel = false;
  std::vector<double> shared;
  std::vector<double> per_pixel_heights;
};

struct CostVolume {
  static constexpr double kSentinelCost = 1e9;

  int width = 0, height = 0, plane_count = 0;
  std::vector<double> cost;           // (d*H + y)*W + x
  bool per_pixel_planes = false;
  std::vector<double> plane_height;   // D entries, or cost layout
  std::vector<uint16_t> valid_views;  // contributing views per cell

  size_t idx(int x, int y, int d) const {
    return (static_cast<size_t>(d) * height + y) * width + x;
  }
  double plane_at(int x, int y, int d) const {
    return per_pixel_planes ? plane_height[idx(x, y, d)] : plane_height[d];
  }
};

struct HeightMap {
  int width = 0, height = 0;
  std::vector<double> height_m;
  std::vector<uint8_t> valid;
  int level_factor = 1;  // pyramid scale divisor

  size_t idx(int x, int y) const {
    return static_cast<size_t>(y) * width + x;
  }
};

// Plane-sweep matching cost for one stage: every source view is warped onto
// the reference grid through each hypothesis plane (batched RPC warping +
// bilinear resampling); the per-cell cost is the mean over feature channels
// of the sample variance across the contributing views. Cells seen by fewer
// than cfg.min_valid_views views carry the sentinel cost. Throws when no
// cell in the whole volume is valid.
CostVolume sweep_stage(const std::vector<SweepView>& views,
                       const std::vector<FeaturePyramid>& pyramids,
                       int ref_index, int level_index,
                       const StagePlanes& planes, const SweepConfig& cfg);

// Per-plane box filter over valid cells, normalized by the valid count;
// radius 0 returns the volume unchanged. Invalid cells stay sentinel.
CostVolume aggregate_cost(const CostVolume& vol, int radius,
                          int min_valid_views = 2, int threads = 1);

// Height regression: per pixel, softmax(-cost / temperature) over the planes
// weights the plane heights. A pixel is valid iff its argmin plane saw at
// least min_valid_views views.
HeightMap soft_argmin(const CostVolume& vol, double temperature,
                      int min_valid_views = 2, int threads = 1);

// Full coarse-to-fine pass: stage 1 sweeps [d_min, d_max] at the coarsest
// scale; later stages re-center per pixel on the bilinearly upsampled
// previous height map, clamped to the global range. Returns the
// full-resolution map.
HeightMap run_multistage(const std::vector<SweepView>& views, int ref_index,
                         double d_min, double d_max, const SweepConfig& cfg);

// upsample to new dimensions by valid-aware bilinear interpolation
HeightMap upsample_height_map(const HeightMap& hm, int new_width,
                              int new_height, int new_factor);

// PFM (float32, bottom-up scanlines, NaN nodata) plus a JSON sidecar with
// the pyramid scale, plane schedule, and validity statistics.
void write_height_map(const HeightMap& hm, const std::string& pfm_path,
                      const HeightPlaneSchedule* schedule = nullptr);
HeightMap read_height_map(const std::string& pfm_path);

}  // namespace satsweep
