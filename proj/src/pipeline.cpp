#include "satsweep/pipeline.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "satsweep/geodesy.h"
#include "satsweep/parallel.h"

namespace satsweep {

RpcRangeSource::RpcRangeSource(const std::vector<const RpcModel*>& models) {
  if (models.empty()) throw Error("RpcRangeSource: no models");
  h_min_ = -1e300;
  h_max_ = 1e300;
  for (const RpcModel* m : models) {
    h_min_ = std::max(h_min_, m->height_min);
    h_max_ = std::min(h_max_, m->height_max);
  }
  if (!(h_min_ < h_max_))
    throw Error("RpcRangeSource: models have disjoint height ranges");
}

void RpcRangeSource::height_bounds(const LatLonRect&, double& h_min,
                                   double& h_max) const {
  h_min = h_min_;
  h_max = h_max_;
}

DemElevationSource::DemElevationSource(const std::string& path,
                                       double margin_m)
    : grid_(read_esri_grid(path)), margin_(margin_m) {}

void DemElevationSource::height_bounds(const LatLonRect& block, double& h_min,
                                       double& h_max) const {
  // grid coordinates are degrees: xll = lon0, yll = lat0
  h_min = 1e300;
  h_max = -1e300;
  for (int r = 0; r < grid_.rows; ++r)
    for (int c = 0; c < grid_.cols; ++c) {
      const double v = grid_.at(r, c);
      if (grid_.is_nodata(v)) continue;
      const double lon = grid_.xll + (c + 0.5) * grid_.cell;
      const double lat = grid_.yll + (grid_.rows - 1 - r + 0.5) * grid_.cell;
      if (lon < block.lon0 || lon > block.lon1 || lat < block.lat0 ||
          lat > block.lat1)
        continue;
      h_min = std::min(h_min, v);
      h_max = std::max(h_max, v);
    }
  if (h_min > h_max)
    throw Error("DemElevationSource: block outside the DEM coverage");
  h_min -= margin_;
  h_max += margin_;
}

std::vector<GeoBlock> block_partition(const LatLonRect& aoi,
                                      double block_size_m,
                                      const ElevationSource& elevation) {
  if (aoi.empty()) throw Error("block_partition: empty AOI");
  if (!(block_size_m > 0)) throw Error("block_partition: bad block size");
  const double clat = 0.5 * (aoi.lat0 + aoi.lat1);
  const double dlat = block_size_m / meters_per_degree_lat(clat);
  const double dlon = block_size_m / meters_per_degree_lon(clat);
  const int ny = std::max(
      1, static_cast<int>(std::ceil((aoi.lat1 - aoi.lat0) / dlat - 1e-9)));
  const int nx = std::max(
      1, static_cast<int>(std::ceil((aoi.lon1 - aoi.lon0) / dlon - 1e-9)));

  std::vector<GeoBlock> blocks;
  int id = 0;
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      GeoBlock b;
      b.id = id++;
      b.bounds.lat0 = aoi.lat0 + iy * dlat;
      b.bounds.lat1 = iy + 1 == ny ? aoi.lat1
                                   : std::min(aoi.lat1, aoi.lat0 + (iy + 1) * dlat);
      b.bounds.lon0 = aoi.lon0 + ix * dlon;
      b.bounds.lon1 = ix + 1 == nx ? aoi.lon1
                                   : std::min(aoi.lon1, aoi.lon0 + (ix + 1) * dlon);
      elevation.height_bounds(b.bounds, b.h_min, b.h_max);
      if (!(b.h_min < b.h_max))
        throw Error("block_partition: degenerate height bounds");
      blocks.push_back(b);
    }
  return blocks;
}

CropSpec compute_crop(const RpcModel& m, const GeoBlock& block,
                      double pad_px) {
  double smin = 1e300, smax = -1e300, lmin = 1e300, lmax = -1e300;
  const double lats[2] = {block.bounds.lat0, block.bounds.lat1};
  const double lons[2] = {block.bounds.lon0, block.bounds.lon1};
  const double heis[2] = {block.h_min, block.h_max};
  for (double lat : lats)
    for (double lon : lons)
      for (double hei : heis) {
        const ImagePoint q = project_forward(m, {lat, lon, hei});
        smin = std::min(smin, q.samp);
        smax = std::max(smax, q.samp);
        lmin = std::min(lmin, q.line);
        lmax = std::max(lmax, q.line);
      }
  CropSpec crop;
  crop.x = static_cast<int>(std::floor(smin - pad_px));
  crop.y = static_cast<int>(std::floor(lmin - pad_px));
  crop.w = static_cast<int>(std::ceil(smax + pad_px)) - crop.x + 1;
  crop.h = static_cast<int>(std::ceil(lmax + pad_px)) - crop.y + 1;
  return crop;
}

std::vector<CropSpec> compute_uniform_crops(
    const std::vector<const RpcModel*>& models,
    const std::vector<std::pair<int, int>>& image_sizes, const GeoBlock& block,
    double pad_px, int multiple) {
  if (models.size() != image_sizes.size())
    throw Error("compute_uniform_crops: size mismatch");
  std::vector<CropSpec> crops;
  int max_w = 0, max_h = 0;
  for (size_t v = 0; v < models.size(); ++v) {
    CropSpec c = compute_crop(*models[v], block, pad_px);
    c.view = static_cast<int>(v);
    crops.push_back(c);
    max_w = std::max(max_w, c.w);
    max_h = std::max(max_h, c.h);
  }
  auto round_up = [multiple](int v) {
    return ((v + multiple - 1) / multiple) * multiple;
  };
  max_w = round_up(max_w);
  max_h = round_up(max_h);

  for (size_t v = 0; v < crops.size(); ++v) {
    CropSpec& c = crops[v];
    const int img_w = image_sizes[v].first;
    const int img_h = image_sizes[v].second;
    const int want_w = std::min(max_w, img_w / multiple * multiple);
    const int want_h = std::min(max_h, img_h / multiple * multiple);
    c.x -= (want_w - c.w) / 2;
    c.y -= (want_h - c.h) / 2;
    c.w = want_w;
    c.h = want_h;
    c.x = std::clamp(c.x, 0, std::max(0, img_w - c.w));
    c.y = std::clamp(c.y, 0, std::max(0, img_h - c.h));
    if (c.w <= 0 || c.h <= 0 || c.x + c.w > img_w || c.y + c.h > img_h)
      throw Error("compute_uniform_crops: block crop outside image " +
                  std::to_string(v));
  }
  return crops;
}

HeightMap geometric_consistency_filter(
    const std::vector<HeightMap>& maps,
    const std::vector<const RpcModel*>& rpcs,
    const std::vector<std::pair<double, double>>& origins, int ref_index,
    double threshold_px, int min_consistent, int threads) {
  const int n_views = static_cast<int>(maps.size());
  if (n_views < 2 || rpcs.size() != maps.size() ||
      origins.size() != maps.size())
    throw Error("consistency filter: mismatched geometry inputs");
  const HeightMap& ref = maps[ref_index];
  HeightMap out = ref;

  // valid-aware bilinear lookup of a height map
  auto sample_map = [&](int vi, double x, double y, double& h) -> bool {
    const HeightMap& hm = maps[vi];
    if (x < 0 || y < 0 || x > hm.width - 1 || y > hm.height - 1) return false;
    const int x0 = std::min(static_cast<int>(std::floor(x)),
                            std::max(0, hm.width - 2));
    const int y0 = std::min(static_cast<int>(std::floor(y)),
                            std::max(0, hm.height - 2));
    const double fx = x - x0, fy = y - y0;
    double wsum = 0.0, vsum = 0.0;
    for (int dy = 0; dy <= 1 && y0 + dy < hm.height; ++dy)
      for (int dx = 0; dx <= 1 && x0 + dx < hm.width; ++dx) {
        if (!hm.valid[hm.idx(x0 + dx, y0 + dy)]) continue;
        const double wgt = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
        wsum += wgt;
        vsum += wgt * hm.height_m[hm.idx(x0 + dx, y0 + dy)];
      }
    if (wsum < 1e-9) return false;
    h = vsum / wsum;
    return true;
  };

  parallel_for(0, ref.height, threads, [&](int64_t row) {
    for (int x = 0; x < ref.width; ++x) {
      const size_t pix = ref.idx(x, static_cast<int>(row));
      if (!ref.valid[pix]) continue;
      const double full_s = origins[ref_index].first + x;
      const double full_l = origins[ref_index].second + row;
      const double h = ref.height_m[pix];
      int n_ok = 0;
      try {
        const GroundPoint g = localize(*rpcs[ref_index], {full_s, full_l}, h);
        for (int j = 0; j < n_views && n_ok < min_consistent; ++j) {
          if (j == ref_index) continue;
          const ImagePoint qj = project_forward(*rpcs[j], g);
          double hj;
          if (!sample_map(j, qj.samp - origins[j].first,
                          qj.line - origins[j].second, hj))
            continue;
          const GroundPoint gj = localize(*rpcs[j], qj, hj);
          const ImagePoint back = project_forward(*rpcs[ref_index], gj);
          const double dist =
              std::hypot(back.samp - full_s, back.line - full_l);
          if (dist < threshold_px) ++n_ok;
        }
      } catch (const Error&) {
        n_ok = 0;  // degenerate geometry drops the pixel
      }
      if (n_ok < min_consistent) out.valid[pix] = 0;
    }
  });
  return out;
}

DsmGridSpec make_dsm_grid(const LatLonRect& aoi, double cell,
                          int forced_zone) {
  if (aoi.empty()) throw Error("make_dsm_grid: empty AOI");
  if (!(cell > 0)) throw Error("make_dsm_grid: bad cell size");
  DsmGridSpec g;
  g.cell = cell;
  g.zone = forced_zone > 0
               ? forced_zone
               : utm_zone_from_longitude(0.5 * (aoi.lon0 + aoi.lon1));
  g.south = 0.5 * (aoi.lat0 + aoi.lat1) < 0.0;
  double emin = 1e300, emax = -1e300, nmin = 1e300, nmax = -1e300;
  const double lats[2] = {aoi.lat0, aoi.lat1};
  const double lons[2] = {aoi.lon0, aoi.lon1};
  for (double lat : lats)
    for (double lon : lons) {
      const UtmCoord u = geodetic_to_utm(lat, lon, g.zone, g.south);
      emin = std::min(emin, u.easting);
      emax = std::max(emax, u.easting);
      nmin = std::min(nmin, u.northing);
      nmax = std::max(nmax, u.northing);
    }
  g.xll = std::floor(emin / cell) * cell;
  g.yll = std::floor(nmin / cell) * cell;
  g.cols = static_cast<int>(std::ceil((emax - g.xll) / cell));
  g.rows = static_cast<int>(std::ceil((nmax - g.yll) / cell));
  return g;
}

namespace {

Dsm empty_dsm(const DsmGridSpec& g) {
  Dsm d;
  d.zone = g.zone;
  d.south = g.south;
  d.cell = g.cell;
  d.xll = g.xll;
  d.yll = g.yll;
  d.rows = g.rows;
  d.cols = g.cols;
  d.values.assign(static_cast<size_t>(g.rows) * g.cols, d.nodata);
  return d;
}

double sorted_median(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Dsm fuse_dsm(const std::vector<HeightMap>& maps,
             const std::vector<const RpcModel*>& rpcs,
             const std::vector<std::pair<double, double>>& origins,
             const DsmGridSpec& grid) {
  Dsm dsm = empty_dsm(grid);
  std::map<std::pair<int, int>, std::vector<double>> bins;
  for (size_t v = 0; v < maps.size(); ++v) {
    const HeightMap& hm = maps[v];
    for (int y = 0; y < hm.height; ++y)
      for (int x = 0; x < hm.width; ++x) {
        const size_t pix = hm.idx(x, y);
        if (!hm.valid[pix]) continue;
        const double h = hm.height_m[pix];
        GroundPoint g;
        try {
          g = localize(*rpcs[v], {origins[v].first + x, origins[v].second + y},
                       h);
        } catch (const Error&) {
          continue;
        }
        UtmCoord u;
        try {
          u = geodetic_to_utm(g.lat, g.lon, grid.zone, grid.south);
        } catch (const Error&) {
          continue;
        }
        int r, c;
        if (!dsm.cell_of(u.easting, u.northing, r, c)) continue;
        bins[{r, c}].push_back(h);
      }
  }
  for (auto& [rc, values] : bins)
    dsm.at(rc.first, rc.second) = sorted_median(values);
  return dsm;
}

PipelineConfig load_pipeline_config(const std::string& json_path) {
  std::ifstream in(json_path);
  if (!in) throw Error("cannot open config: " + json_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("config parse error: ") + e.what());
  }
  PipelineConfig cfg;
  cfg.block_size_m = j.value("block_size_m", cfg.block_size_m);
  cfg.pad_px = j.value("pad_px", cfg.pad_px);
  cfg.consistency_threshold_px =
      j.value("consistency_threshold_px", cfg.consistency_threshold_px);
  cfg.min_consistent_views =
      j.value("min_consistent_views", cfg.min_consistent_views);
  cfg.cell_size_m = j.value("cell_size_m", cfg.cell_size_m);
  cfg.utm_zone = j.value("utm_zone", cfg.utm_zone);
  cfg.dem_path = j.value("dem_path", cfg.dem_path);
  cfg.threads = j.value("threads", cfg.threads);
  cfg.sweep.temperature = j.value("temperature", cfg.sweep.temperature);
  cfg.sweep.aggregation_radius =
      j.value("aggregation_radius", cfg.sweep.aggregation_radius);
  cfg.sweep.min_valid_views =
      j.value("min_valid_views", cfg.sweep.min_valid_views);
  if (j.contains("plane_counts")) {
    const auto counts = j["plane_counts"].get<std::vector<int>>();
    const auto intervals =
        j.value("plane_intervals", std::vector<double>(counts.size(), 0.0));
    if (counts.size() != intervals.size())
      throw Error("config: plane_counts and plane_intervals disagree");
    cfg.sweep.stages.clear();
    for (size_t i = 0; i < counts.size(); ++i)
      cfg.sweep.stages.push_back({counts[i], intervals[i]});
  }
  if (j.contains("pyramid_factors"))
    cfg.sweep.pyramid_factors = j["pyramid_factors"].get<std::vector<int>>();
  if (cfg.sweep.pyramid_factors.size() != cfg.sweep.stages.size())
    throw Error("config: one pyramid factor per stage expected");
  return cfg;
}

PipelineResult run_pipeline(const std::vector<PipelineView>& views,
                            const LatLonRect& aoi, const PipelineConfig& cfg,
                            const Dsm* ground_truth) {
  const auto t0 = std::chrono::steady_clock::now();
  if (views.size() < 2) throw Error("run_pipeline: need at least 2 views");
  if (aoi.empty()) throw Error("run_pipeline: empty AOI");

  PipelineResult result;
  std::vector<const RpcModel*> rpcs;
  std::vector<std::pair<int, int>> sizes;
  std::vector<RpcModel> fitted;  // inverse-completed copies when needed
  fitted.reserve(views.size());
  for (const PipelineView& v : views) {
    fitted.push_back(v.rpc);
    if (!fitted.back().has_inverse) fit_inverse_rpc(fitted.back());
    sizes.push_back({v.image.width, v.image.height});
  }
  for (const RpcModel& m : fitted) rpcs.push_back(&m);

  std::unique_ptr<ElevationSource> elevation;
  if (!cfg.dem_path.empty())
    elevation = std::make_unique<DemElevationSource>(cfg.dem_path);
  else
    elevation = std::make_unique<RpcRangeSource>(rpcs);

  const std::vector<GeoBlock> blocks =
      block_partition(aoi, cfg.block_size_m, *elevation);
  const DsmGridSpec grid = make_dsm_grid(aoi, cfg.cell_size_m, cfg.utm_zone);

  SweepConfig sweep_cfg = cfg.sweep;
  sweep_cfg.threads = cfg.threads;

  // per-cell values contributed by each block; overlap resolved by median
  std::map<std::pair<int, int>, std::vector<double>> mosaic;

  for (const GeoBlock& block : blocks) {
    try {
      const std::vector<CropSpec> crops =
          compute_uniform_crops(rpcs, sizes, block, cfg.pad_px);

      std::vector<RasterF> crop_imgs(views.size());
      std::vector<SweepView> sweep_views(views.size());
      std::vector<std::pair<double, double>> origins(views.size());
      for (size_t v = 0; v < views.size(); ++v) {
        const CropSpec& c = crops[v];
        crop_imgs[v] = RasterF(c.w, c.h, 1);
        for (int y = 0; y < c.h; ++y)
          for (int x = 0; x < c.w; ++x)
            crop_imgs[v].at(x, y) = views[v].image.at(c.x + x, c.y + y);
        sweep_views[v] = {&crop_imgs[v], rpcs[v],
                          static_cast<double>(c.x), static_cast<double>(c.y)};
        origins[v] = {static_cast<double>(c.x), static_cast<double>(c.y)};
      }

      // every view takes the reference role in turn
      std::vector<HeightMap> maps(views.size());
      for (size_t r = 0; r < views.size(); ++r)
        maps[r] = run_multistage(sweep_views, static_cast<int>(r),
                                 block.h_min, block.h_max, sweep_cfg);

      std::vector<HeightMap> filtered(views.size());
      for (size_t r = 0; r < views.size(); ++r)
        filtered[r] = geometric_consistency_filter(
            maps, rpcs, origins, static_cast<int>(r),
            cfg.consistency_threshold_px, cfg.min_consistent_views,
            cfg.threads);

      const Dsm block_dsm = fuse_dsm(filtered, rpcs, origins, grid);
      for (int r = 0; r < block_dsm.rows; ++r)
        for (int c = 0; c < block_dsm.cols; ++c) {
          const double v = block_dsm.at(r, c);
          if (!block_dsm.is_nodata(v)) mosaic[{r, c}].push_back(v);
        }

      result.ref_height_maps = std::move(filtered);
      result.ref_origins = origins;
    } catch (const Error& e) {
      result.block_errors.push_back("block " + std::to_string(block.id) +
                                    ": " + e.what());
    }
  }

  result.dsm = empty_dsm(grid);
  for (auto& [rc, values] : mosaic)
    result.dsm.at(rc.first, rc.second) = sorted_median(values);

  if (ground_truth) {
    result.metrics = evaluate_dsm(result.dsm, *ground_truth);
    result.has_metrics = true;
  }
  result.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return result;
}

}  // namespace satsweep
