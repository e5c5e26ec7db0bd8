#include "satsweep/sweep.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "satsweep/parallel.h"
#include "satsweep/raster_io.h"

namespace satsweep {

HeightPlaneSchedule build_schedule(double d_min, double d_max,
                                   const SweepConfig& cfg) {
  if (!(d_min < d_max))
    throw Error("build_schedule: d_min must be below d_max");
  if (cfg.stages.empty()) throw Error("build_schedule: no stages");
  HeightPlaneSchedule s;
  s.d_min = d_min;
  s.d_max = d_max;
  for (size_t i = 0; i < cfg.stages.size(); ++i) {
    HeightPlaneSchedule::Stage st;
    st.plane_count = cfg.stages[i].plane_count;
    if (st.plane_count < 2)
      throw Error("build_schedule: plane_count must be at least 2");
    st.center_on_previous = i > 0;
    st.interval = cfg.stages[i].interval > 0.0
                      ? cfg.stages[i].interval
                      : (d_max - d_min) / st.plane_count;
    if (!(st.interval > 0.0))
      throw Error("build_schedule: interval must be positive");
    s.stages.push_back(st);
  }
  return s;
}

std::vector<double> centered_planes(double center, int count, double interval,
                                    double d_min, double d_max) {
  std::vector<double> planes(count);
  for (int d = 0; d < count; ++d)
    planes[d] = std::clamp(center + (d - 0.5 * (count - 1)) * interval, d_min,
                           d_max);
  return planes;
}

FeaturePyramid extract_features(const RasterF& gray,
                                const std::vector<int>& factors) {
  if (gray.channels != 1)
    throw Error("extract_features: grayscale input expected");
  FeaturePyramid pyr;
  for (int f : factors) {
    if (f < 1) throw Error("extract_features: bad pyramid factor");
    FeaturePyramid::Level lvl;
    lvl.factor = f;
    const int w = gray.width / f;
    const int h = gray.height / f;
    if (w < 2 || h < 2)
      throw Error("extract_features: image too small for the pyramid");
    RasterF down(w, h, 1);
    if (f == 1) {
      down.data.assign(gray.data.begin(), gray.data.end());
    } else {
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          double sum = 0.0;
          for (int dy = 0; dy < f; ++dy)
            for (int dx = 0; dx < f; ++dx)
              sum += gray.at(x * f + dx, y * f + dy);
          down.at(x, y) = static_cast<float>(sum / (f * f));
        }
    }

    lvl.channels = RasterF(w, h, 3);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        lvl.channels.at(x, y, 0) = down.at(x, y);
        const int xm = std::max(0, x - 1), xp = std::min(w - 1, x + 1);
        const int ym = std::max(0, y - 1), yp = std::min(h - 1, y + 1);
        lvl.channels.at(x, y, 1) =
            (down.at(xp, y) - down.at(xm, y)) / static_cast<float>(xp - xm);
        lvl.channels.at(x, y, 2) =
            (down.at(x, yp) - down.at(x, ym)) / static_cast<float>(yp - ym);
      }

    // zero-mean unit-variance per channel over the tile
    const size_t n = static_cast<size_t>(w) * h;
    for (int c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (size_t i = 0; i < n; ++i) mean += lvl.channels.data[c * n + i];
      mean /= n;
      double var = 0.0;
      for (size_t i = 0; i < n; ++i) {
        const double d = lvl.channels.data[c * n + i] - mean;
        var += d * d;
      }
      var /= n;
      const double inv = var > 1e-12 ? 1.0 / std::sqrt(var) : 0.0;
      for (size_t i = 0; i < n; ++i)
        lvl.channels.data[c * n + i] = static_cast<float>(
            (lvl.channels.data[c * n + i] - mean) * inv);
    }
    pyr.levels.push_back(std::move(lvl));
  }
  return pyr;
}

namespace {

// center of a feature pixel in full-image coordinates
inline double feature_to_full(double coord, int factor, double origin) {
  return origin + factor * coord + 0.5 * (factor - 1);
}
inline double full_to_feature(double coord, int factor, double origin) {
  return (coord - origin - 0.5 * (factor - 1)) / factor;
}

}  // namespace

CostVolume sweep_stage(const std::vector<SweepView>& views,
                       const std::vector<FeaturePyramid>& pyramids,
                       int ref_index, int level_index,
                       const StagePlanes& planes, const SweepConfig& cfg) {
  if (views.size() < 2 || views.size() != pyramids.size())
    throw Error("sweep_stage: need a reference and at least one source view");
  if (ref_index < 0 || ref_index >= static_cast<int>(views.size()))
    throw Error("sweep_stage: bad reference index");
  const FeaturePyramid::Level& ref_lvl = pyramids[ref_index].levels[level_index];
  const int w = ref_lvl.channels.width;
  const int h = ref_lvl.channels.height;
  const int factor = ref_lvl.factor;
  const int d_count = planes.count;
  const size_t cells = static_cast<size_t>(w) * h;

  CostVolume vol;
  vol.width = w;
  vol.height = h;
  vol.plane_count = d_count;
  vol.cost.assign(cells * d_count, CostVolume::kSentinelCost);
  vol.valid_views.assign(cells * d_count, 1);  // the reference always sees
  vol.per_pixel_planes = planes.per_pixel;
  if (planes.per_pixel) {
    if (planes.per_pixel_heights.size() != cells * d_count)
      throw Error("sweep_stage: per-pixel plane field size mismatch");
    vol.plane_height = planes.per_pixel_heights;
  } else {
    if (static_cast<int>(planes.shared.size()) != d_count)
      throw Error("sweep_stage: shared plane list size mismatch");
    vol.plane_height = planes.shared;
  }

  const SweepView& ref = views[ref_index];
  const int n_views = static_cast<int>(views.size());
  const int n_src = n_views - 1;

  // warped source features per view for one plane, then fuse
  std::vector<double> heights(cells);
  std::vector<double> ref_samp(cells), ref_line(cells);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      ref_samp[y * w + x] = feature_to_full(x, factor, ref.origin_x);
      ref_line[y * w + x] = feature_to_full(y, factor, ref.origin_y);
    }

  std::vector<RasterF> warped(n_src);
  std::vector<std::vector<uint8_t>> warped_mask(n_src);

  for (int d = 0; d < d_count; ++d) {
    if (planes.per_pixel)
      std::copy(planes.per_pixel_heights.begin() + d * cells,
                planes.per_pixel_heights.begin() + (d + 1) * cells,
                heights.begin());
    else
      std::fill(heights.begin(), heights.end(), planes.shared[d]);

    for (int s = 0; s < n_src; ++s) {
      const int vi = s < ref_index ? s : s + 1;
      const SweepView& src = views[vi];
      const FeaturePyramid::Level& src_lvl = pyramids[vi].levels[level_index];

      // reference feature pixels -> source full-image coordinates
      CoordMap map;
      map.width = w;
      map.height = h;
      map.samp.assign(cells, 0.0);
      map.line.assign(cells, 0.0);
      map.valid.assign(cells, 0);
      {
        CoordMap full = warp_points_map(*ref.rpc, *src.rpc, ref_samp, ref_line,
                                        heights, cfg.threads);
        // to source feature-level coordinates
        parallel_for(0, static_cast<int64_t>(cells), cfg.threads,
                     [&](int64_t i) {
                       if (!full.valid[i]) return;
                       map.samp[i] = full_to_feature(full.samp[i],
                                                     src_lvl.factor,
                                                     src.origin_x);
                       map.line[i] = full_to_feature(full.line[i],
                                                     src_lvl.factor,
                                                     src.origin_y);
                       map.valid[i] = 1;
                     });
      }
      resample_bilinear(src_lvl.channels, map, warped[s], warped_mask[s],
                        cfg.threads);
    }

    // variance fusion over {reference, valid warped sources}
    parallel_for(0, static_cast<int64_t>(h), cfg.threads, [&](int64_t row) {
      std::vector<double> samples(n_views);
      for (int x = 0; x < w; ++x) {
        const size_t pix = static_cast<size_t>(row) * w + x;
        const size_t cell = static_cast<size_t>(d) * cells + pix;
        int n_valid = 1;
        for (int s = 0; s < n_src; ++s)
          if (warped_mask[s][pix]) ++n_valid;
        vol.valid_views[cell] = static_cast<uint16_t>(n_valid);
        if (n_valid < cfg.min_valid_views) continue;

        double cost_sum = 0.0;
        for (int c = 0; c < 3; ++c) {
          int n = 0;
          samples[n++] = ref_lvl.channels.at(x, static_cast<int>(row), c);
          for (int s = 0; s < n_src; ++s)
            if (warped_mask[s][pix])
              samples[n++] = warped[s].at(x, static_cast<int>(row), c);
          // sorted reduction keeps the result invariant under any
          // permutation of the source views (bitwise)
          std::sort(samples.begin(), samples.begin() + n);
          double mean = 0.0;
          for (int i = 0; i < n; ++i) mean += samples[i];
          mean /= n;
          double var = 0.0;
          for (int i = 0; i < n; ++i) {
            const double dv = samples[i] - mean;
            var += dv * dv;
          }
          cost_sum += var / n;
        }
        vol.cost[cell] = cost_sum / 3.0;
      }
    });
  }

  bool any_valid = false;
  for (size_t i = 0; i < vol.cost.size() && !any_valid; ++i)
    if (vol.valid_views[i] >= cfg.min_valid_views) any_valid = true;
  if (!any_valid)
    throw Error("sweep_stage: empty cost volume (no view overlap)");
  return vol;
}

CostVolume aggregate_cost(const CostVolume& vol, int radius,
                          int min_valid_views, int threads) {
  if (radius < 0) throw Error("aggregate_cost: negative radius");
  if (radius == 0) return vol;
  CostVolume out = vol;
  const int w = vol.width, h = vol.height;
  const size_t cells = static_cast<size_t>(w) * h;

  parallel_for(0, vol.plane_count, threads, [&](int64_t d) {
    // separable sums of (valid cost, valid count)
    std::vector<double> row_sum(cells, 0.0);
    std::vector<int> row_cnt(cells, 0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        int c = 0;
        for (int dx = -radius; dx <= radius; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= w) continue;
          const size_t cell = (static_cast<size_t>(d) * h + y) * w + xx;
          if (vol.valid_views[cell] >= min_valid_views) {
            s += vol.cost[cell];
            ++c;
          }
        }
        row_sum[static_cast<size_t>(y) * w + x] = s;
        row_cnt[static_cast<size_t>(y) * w + x] = c;
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const size_t cell = (static_cast<size_t>(d) * h + y) * w + x;
        if (vol.valid_views[cell] < min_valid_views) continue;  // stays sentinel
        double s = 0.0;
        int c = 0;
        for (int dy = -radius; dy <= radius; ++dy) {
          const int yy = y + dy;
          if (yy < 0 || yy >= h) continue;
          s += row_sum[static_cast<size_t>(yy) * w + x];
          c += row_cnt[static_cast<size_t>(yy) * w + x];
        }
        if (c > 0) out.cost[cell] = s / c;
      }
  });
  return out;
}

HeightMap soft_argmin(const CostVolume& vol, double temperature,
                      int min_valid_views, int threads) {
  if (!(temperature > 0.0))
    throw Error("soft_argmin: temperature must be positive");
  HeightMap hm;
  hm.width = vol.width;
  hm.height = vol.height;
  hm.height_m.assign(static_cast<size_t>(vol.width) * vol.height, 0.0);
  hm.valid.assign(hm.height_m.size(), 0);

  const size_t cells = static_cast<size_t>(vol.width) * vol.height;
  parallel_for(0, static_cast<int64_t>(cells), threads, [&](int64_t pix) {
    const int x = static_cast<int>(pix % vol.width);
    const int y = static_cast<int>(pix / vol.width);
    double cmin = std::numeric_limits<double>::infinity();
    int dmin = 0;
    for (int d = 0; d < vol.plane_count; ++d) {
      const double c = vol.cost[static_cast<size_t>(d) * cells + pix];
      if (c < cmin) {
        cmin = c;
        dmin = d;
      }
    }
    double wsum = 0.0, hsum = 0.0;
    for (int d = 0; d < vol.plane_count; ++d) {
      const double c = vol.cost[static_cast<size_t>(d) * cells + pix];
      const double wgt = std::exp(-(c - cmin) / temperature);
      wsum += wgt;
      hsum += wgt * vol.plane_at(x, y, d);
    }
    hm.height_m[pix] = hsum / wsum;
    hm.valid[pix] =
        vol.valid_views[static_cast<size_t>(dmin) * cells + pix] >=
                min_valid_views
            ? 1
            : 0;
  });
  return hm;
}

HeightMap upsample_height_map(const HeightMap& hm, int new_width,
                              int new_height, int new_factor) {
  HeightMap out;
  out.width = new_width;
  out.height = new_height;
  out.level_factor = new_factor;
  out.height_m.assign(static_cast<size_t>(new_width) * new_height, 0.0);
  out.valid.assign(out.height_m.size(), 0);
  for (int y = 0; y < new_height; ++y)
    for (int x = 0; x < new_width; ++x) {
      // position of the fine pixel center in coarse pixel units
      const double full_x = new_factor * (x + 0.5);
      const double full_y = new_factor * (y + 0.5);
      const double cx = full_x / (static_cast<double>(hm.level_factor)) - 0.5;
      const double cy = full_y / (static_cast<double>(hm.level_factor)) - 0.5;
      const int x0 = static_cast<int>(std::floor(cx));
      const int y0 = static_cast<int>(std::floor(cy));
      const double fx = cx - x0;
      const double fy = cy - y0;
      double wsum = 0.0, vsum = 0.0;
      for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
          const int xx = std::clamp(x0 + dx, 0, hm.width - 1);
          const int yy = std::clamp(y0 + dy, 0, hm.height - 1);
          if (!hm.valid[hm.idx(xx, yy)]) continue;
          const double wgt = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
          wsum += wgt;
          vsum += wgt * hm.height_m[hm.idx(xx, yy)];
        }
      if (wsum > 1e-12) {
        out.height_m[out.idx(x, y)] = vsum / wsum;
        out.valid[out.idx(x, y)] = 1;
      }
    }
  return out;
}

HeightMap run_multistage(const std::vector<SweepView>& views, int ref_index,
                         double d_min, double d_max, const SweepConfig& cfg) {
  const HeightPlaneSchedule schedule = build_schedule(d_min, d_max, cfg);
  if (schedule.stages.size() != cfg.pyramid_factors.size())
    throw Error("run_multistage: one pyramid scale per stage expected");

  std::vector<FeaturePyramid> pyramids;
  pyramids.reserve(views.size());
  for (const SweepView& v : views)
    pyramids.push_back(extract_features(*v.image, cfg.pyramid_factors));

  HeightMap prev;
  for (size_t stage = 0; stage < schedule.stages.size(); ++stage) {
    const HeightPlaneSchedule::Stage& st = schedule.stages[stage];
    const FeaturePyramid::Level& ref_lvl =
        pyramids[ref_index].levels[stage];
    const int w = ref_lvl.channels.width;
    const int h = ref_lvl.channels.height;
    const size_t cells = static_cast<size_t>(w) * h;

    StagePlanes planes;
    planes.count = st.plane_count;
    if (!st.center_on_previous) {
      planes.per_pixel = false;
      planes.shared.resize(st.plane_count);
      for (int d = 0; d < st.plane_count; ++d)
        planes.shared[d] =
            d_min + (d_max - d_min) * d / (st.plane_count - 1);
    } else {
      const HeightMap centers =
          upsample_height_map(prev, w, h, ref_lvl.factor);
      planes.per_pixel = true;
      planes.per_pixel_heights.resize(cells * st.plane_count);
      const double mid = 0.5 * (d_min + d_max);
      for (size_t pix = 0; pix < cells; ++pix) {
        const double center = centers.valid[pix] ? centers.height_m[pix] : mid;
        const std::vector<double> col = centered_planes(
            center, st.plane_count, st.interval, d_min, d_max);
        for (int d = 0; d < st.plane_count; ++d)
          planes.per_pixel_heights[d * cells + pix] = col[d];
      }
    }

    CostVolume vol =
        sweep_stage(views, pyramids, ref_index, static_cast<int>(stage),
                    planes, cfg);
    vol = aggregate_cost(vol, cfg.aggregation_radius, cfg.min_valid_views,
                         cfg.threads);
    prev = soft_argmin(vol, cfg.temperature, cfg.min_valid_views,
                       cfg.threads);
    prev.level_factor = ref_lvl.factor;
  }
  return prev;
}

void write_height_map(const HeightMap& hm, const std::string& pfm_path,
                      const HeightPlaneSchedule* schedule) {
  RasterF img(hm.width, hm.height, 1,
              std::numeric_limits<float>::quiet_NaN());
  size_t n_valid = 0;
  for (size_t i = 0; i < hm.height_m.size(); ++i)
    if (hm.valid[i]) {
      img.data[i] = static_cast<float>(hm.height_m[i]);
      ++n_valid;
    }
  write_pfm(img, pfm_path);

  nlohmann::json j;
  j["scale"] = hm.level_factor;
  j["valid_pixels"] = n_valid;
  j["total_pixels"] = hm.height_m.size();
  j["valid_fraction"] =
      hm.height_m.empty() ? 0.0
                          : static_cast<double>(n_valid) / hm.height_m.size();
  if (schedule) {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& st : schedule->stages)
      stages.push_back({{"plane_count", st.plane_count},
                        {"interval_m", st.interval},
                        {"centering", st.center_on_previous
                                          ? "previous-height-map"
                                          : "global-range"}});
    j["plane_schedule"] = {{"d_min", schedule->d_min},
                           {"d_max", schedule->d_max},
                           {"stages", stages}};
  }
  std::ofstream side(pfm_path + ".json");
  if (!side) throw Error("cannot write height-map sidecar");
  side << j.dump(2) << "\n";
}

HeightMap read_height_map(const std::string& pfm_path) {
  const RasterF img = read_pfm(pfm_path);
  HeightMap hm;
  hm.width = img.width;
  hm.height = img.height;
  hm.height_m.resize(img.pixel_count());
  hm.valid.resize(img.pixel_count());
  for (size_t i = 0; i < img.data.size(); ++i) {
    const bool ok = std::isfinite(img.data[i]);
    hm.valid[i] = ok ? 1 : 0;
    hm.height_m[i] = ok ? img.data[i] : 0.0;
  }
  std::ifstream side(pfm_path + ".json");
  if (side) {
    nlohmann::json j;
    side >> j;
    hm.level_factor = j.value("scale", 1);
  }
  return hm;
}

}  // namespace satsweep
