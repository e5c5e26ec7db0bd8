#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "satsweep/dsm.h"
#include "satsweep/geometry.h"
#include "satsweep/raster.h"
#include "satsweep/rpc_model.h"

namespace satsweep {

// Closed-form ground<->image mapping used as the known-truth oracle behind
// synthetic RPC models.
class AnalyticProjector {
 public:
  virtual ~AnalyticProjector() = default;
  virtual ImagePoint project(const GroundPoint& g) const = 0;
  // exact inverse: pixel + height plane -> ground
  virtual GroundPoint localize(const ImagePoint& q, double hei) const = 0;
};

// lat/lon x height box a synthetic model is valid over
struct SceneCube {
  LatLonRect bounds;
  double h_min = 0.0, h_max = 0.0;
};

// 3x4 projective camera over local UTM coordinates (easting/northing rebased
// at the scene center, height in meters).
class PinholeProjector : public AnalyticProjector {
 public:
  PinholeProjector(const double P[12], double center_lat, double center_lon);

  ImagePoint project(const GroundPoint& g) const override;
  GroundPoint localize(const ImagePoint& q, double hei) const override;

  int zone() const { return zone_; }

 private:
  double p_[3][4];
  double origin_e_ = 0.0, origin_n_ = 0.0;
  int zone_ = 0;
  bool south_ = false;
};

// Push-broom-like camera: the line coordinate is linear in the along-track
// ground coordinate (plus a height-parallax term), the samp coordinate is
// perspective in the cross-track plane. Not exactly projective as a 3x4
// camera, so pin-hole fitting error grows with patch size.
class PushbroomProjector : public AnalyticProjector {
 public:
  struct Params {
    double center_lat = 30.0, center_lon = 114.0;
    double gsd_samp = 2.5, gsd_line = 2.5;  // meters per pixel at h = 0
    double altitude = 600000.0;             // meters
    double tan_along = 0.0;   // along-track view tangent (height parallax)
    double cam_offset_e = 0.0;  // cross-track camera offset, meters
    double samp_center = 0.0, line_center = 0.0;  // pixel of scene center
  };

  explicit PushbroomProjector(const Params& p);

  ImagePoint project(const GroundPoint& g) const override;
  GroundPoint localize(const ImagePoint& q, double hei) const override;

  // closed-form localization straight to absolute UTM meters (no geodetic
  // conversion); E and N are affine in hei for a fixed pixel
  void localize_utm(const ImagePoint& q, double hei, double& easting,
                    double& northing) const;

  // nominal d(samp,line)/dh at the scene center
  void height_parallax_rate(double& dsamp, double& dline) const;
  int zone() const { return zone_; }

 private:
  Params prm_;
  double origin_e_ = 0.0, origin_n_ = 0.0;
  int zone_ = 0;
  bool south_ = false;
};

struct RpcFitOptions {
  GridSpec3 fit_grid{15, 15, 11};
  GridSpec3 check_grid{21, 21, 13};
  double max_residual_px = 0.02;  // generation fails above this
  GridSpec3 inverse_grid{11, 11, 9};
};

// Fits the forward rational polynomials of an RPC model to the projector over
// the cube (least squares, denominator constants pinned to 1), then fits the
// inverse polynomials. Throws when the forward fit residual on the check grid
// exceeds max_residual_px (cube too large for a cubic rational fit).
RpcModel gen_rpc_from_projector(const AnalyticProjector& proj,
                                const SceneCube& cube,
                                const RpcFitOptions& opt = {},
                                double* out_residual_px = nullptr);

struct SceneParams {
  uint64_t terrain_seed = 1;
  uint64_t texture_seed = 2;
  int image_size = 512;        // pixels, square views
  double gsd = 2.5;            // meters
  double relief = 300.0;       // terrain max - min, meters
  double base_height = 0.0;    // terrain minimum, meters
  double range_min = -850.0;   // RPC height range, meters
  double range_max = 1150.0;
  double view_angle_deg = 20.0;  // along-track tilt of the side views
  double center_lat = 30.0, center_lon = 114.0;
  int terrain_bumps = 12;
  double ramp_frac = 0.0;      // share of relief carried by a linear ramp
  double min_texture_wavelength_px = 10.0;
  double dsm_cell = 5.0;       // ground-truth grid, meters
  bool render = true;
  int threads = 1;
};

struct SyntheticView {
  std::shared_ptr<PushbroomProjector> projector;
  RpcModel rpc;
  RasterF image;        // values in [0, 1]
  RasterF true_height;  // meters; NaN where the ray misses the terrain
};

// Fully deterministic synthetic scene: analytic terrain and texture, three
// push-broom views (nadir plus forward/backward tilted), fitted RPCs, and a
// ground-truth DSM over the suggested AOI.
struct SyntheticScene {
  SceneParams params;
  SceneCube cube;
  LatLonRect aoi;  // interior region with full multi-view coverage
  int zone = 0;
  bool south = false;
  double origin_e = 0.0, origin_n = 0.0;
  std::vector<SyntheticView> views;
  Dsm ground_truth;

  // terrain/texture live on the UTM grid (absolute easting/northing in the
  // scene zone); the geodetic forms convert exactly and agree everywhere
  double terrain_height_utm(double easting, double northing) const;
  double texture_value_utm(double easting, double northing) const;
  double terrain_height(double lat, double lon) const;
  double texture_value(double lat, double lon) const;

  struct Bump {
    double e, n, sigma, amp;
  };
  // one octave of seeded value noise (non-periodic, so plane-sweep matching
  // has no aliased minima)
  struct Octave {
    double inv_wavelength = 0.0;
    double amp = 0.0;
    uint64_t seed = 0;
  };
  std::vector<Bump> bumps;
  std::vector<Octave> octaves;
  double terrain_offset = 0.0, terrain_scale = 1.0, ramp_rate = 0.0;
  double texture_offset = 0.5, texture_scale = 1.0;
  double m_per_deg_lat = 0.0, m_per_deg_lon = 0.0;
};

SyntheticScene gen_scene(const SceneParams& params);

// Renders one view of the scene: per pixel, the ray's terrain intersection
// (bisection to 1e-4 m) sampled through the texture. Also fills the
// true-height raster.
void render_view(const SyntheticScene& scene, SyntheticView& view,
                 int threads);

// PGM images, RPC text files, PFM true-height maps, ASCII-grid ground truth,
// and a JSON manifest
void write_scene_bundle(const SyntheticScene& scene, const std::string& dir);

}  // namespace satsweep
