#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "satsweep/sweep.h"
#include "satsweep/synthetic.h"
#include "test_helpers.h"

using namespace satsweep;
using namespace satsweep::testing;

namespace {

std::vector<SweepView> scene_views(const SyntheticScene& s) {
  std::vector<SweepView> views;
  for (const SyntheticView& v : s.views)
    views.push_back({&v.image, &v.rpc, 0.0, 0.0});
  return views;
}

// mean of the true height over one feature-level cell
double true_height_at(const SyntheticScene& s, int x, int y, int factor) {
  double sum = 0;
  int n = 0;
  for (int dy = 0; dy < factor; ++dy)
    for (int dx = 0; dx < factor; ++dx) {
      const float v = s.views[0].true_height.at(x * factor + dx,
                                                y * factor + dy);
      if (std::isfinite(v)) {
        sum += v;
        ++n;
      }
    }
  return n ? sum / n : std::nan("");
}

CostVolume tiny_volume(int w, int h, const std::vector<double>& planes) {
  CostVolume vol;
  vol.width = w;
  vol.height = h;
  vol.plane_count = static_cast<int>(planes.size());
  vol.plane_height = planes;
  vol.per_pixel_planes = false;
  vol.cost.assign(static_cast<size_t>(w) * h * planes.size(), 0.0);
  vol.valid_views.assign(vol.cost.size(), 3);
  return vol;
}

}  // namespace

TEST_SUITE("sweep") {

TEST_CASE("schedule resolves the default stage settings") {
  SweepConfig cfg;
  const HeightPlaneSchedule s = build_schedule(0.0, 2000.0, cfg);
  REQUIRE(s.stages.size() == 3);
  CHECK(s.stages[0].plane_count == 64);
  CHECK(s.stages[0].interval == doctest::Approx(31.25));
  CHECK_FALSE(s.stages[0].center_on_previous);
  CHECK(s.stages[1].plane_count == 32);
  CHECK(s.stages[1].interval == 5.0);
  CHECK(s.stages[1].center_on_previous);
  CHECK(s.stages[2].plane_count == 8);
  CHECK(s.stages[2].interval == 2.5);
}

TEST_CASE("refinement planes span the previous height plus-minus 77.5 m") {
  const std::vector<double> planes =
      centered_planes(100.0, 32, 5.0, -850.0, 1150.0);
  REQUIRE(planes.size() == 32);
  CHECK(planes.front() == doctest::Approx(100.0 - 77.5));
  CHECK(planes.back() == doctest::Approx(100.0 + 77.5));
  for (size_t i = 1; i < planes.size(); ++i)
    CHECK(planes[i] - planes[i - 1] == doctest::Approx(5.0));
  // clamped at the global range
  const std::vector<double> clamped =
      centered_planes(-840.0, 32, 5.0, -850.0, 1150.0);
  CHECK(clamped.front() == -850.0);
}

TEST_CASE("an empty height span is rejected") {
  SweepConfig cfg;
  CHECK_THROWS_WITH_AS(build_schedule(100.0, 100.0, cfg),
                       doctest::Contains("d_min"), Error);
}

TEST_CASE("features of a constant image are all zero") {
  RasterF img(64, 64, 1, 3.25f);
  const FeaturePyramid pyr = extract_features(img, {4, 1});
  for (const auto& lvl : pyr.levels)
    for (float v : lvl.channels.data) CHECK(v == 0.0f);
}

TEST_CASE("full-scale intensity channel equals the normalized input") {
  std::mt19937_64 rng(2);
  RasterF img(32, 24, 1);
  for (float& v : img.data) v = static_cast<float>(urand(rng, 0, 1));
  const FeaturePyramid pyr = extract_features(img, {1});
  double mean = 0;
  for (float v : img.data) mean += v;
  mean /= img.data.size();
  double var = 0;
  for (float v : img.data) var += (v - mean) * (v - mean);
  var /= img.data.size();
  const double inv = 1.0 / std::sqrt(var);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 32; ++x)
      CHECK(pyr.levels[0].channels.at(x, y, 0) ==
            doctest::Approx((img.at(x, y) - mean) * inv).epsilon(1e-5));
}

TEST_CASE("downsampling keeps low-frequency content") {
  // smooth image; downsample, upsample, and correlate
  RasterF img(128, 128, 1);
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x)
      img.at(x, y) = static_cast<float>(std::sin(x * 0.11) +
                                        std::cos(y * 0.09) +
                                        0.5 * std::sin((x + y) * 0.05));
  const FeaturePyramid pyr = extract_features(img, {4});
  const RasterF& coarse = pyr.levels[0].channels;  // 32x32, z-scored
  const FeaturePyramid full = extract_features(img, {1});
  double sxy = 0, sxx = 0, syy = 0;
  for (int y = 4; y < 124; ++y)
    for (int x = 4; x < 124; ++x) {
      const double cx = (x + 0.5) / 4.0 - 0.5;
      const double cy = (y + 0.5) / 4.0 - 0.5;
      const int x0 = static_cast<int>(cx), y0 = static_cast<int>(cy);
      const double fx = cx - x0, fy = cy - y0;
      const double up = coarse.at(x0, y0, 0) * (1 - fx) * (1 - fy) +
                        coarse.at(x0 + 1, y0, 0) * fx * (1 - fy) +
                        coarse.at(x0, y0 + 1, 0) * (1 - fx) * fy +
                        coarse.at(x0 + 1, y0 + 1, 0) * fx * fy;
      const double ref = full.levels[0].channels.at(x, y, 0);
      sxy += up * ref;
      sxx += up * up;
      syy += ref * ref;
    }
  CHECK(sxy / std::sqrt(sxx * syy) > 0.99);
}

TEST_CASE("identical views at any plane have near-zero cost") {
  const SyntheticScene& s = small_scene();
  RpcModel m = s.views[0].rpc;
  std::vector<SweepView> views = {{&s.views[0].image, &m, 0, 0},
                                  {&s.views[0].image, &m, 0, 0},
                                  {&s.views[0].image, &m, 0, 0}};
  SweepConfig cfg;
  cfg.pyramid_factors = {4};
  cfg.threads = 1;
  std::vector<FeaturePyramid> pyr;
  for (auto& v : views)
    pyr.push_back(extract_features(*v.image, cfg.pyramid_factors));
  StagePlanes planes;
  planes.count = 3;
  planes.shared = {0.0, 120.0, 290.0};
  const CostVolume vol = sweep_stage(views, pyr, 0, 0, planes, cfg);
  double worst = 0;
  for (int d = 0; d < 3; ++d)
    for (int y = 4; y < vol.height - 4; ++y)
      for (int x = 4; x < vol.width - 4; ++x) {
        const size_t cell = vol.idx(x, y, d);
        if (vol.valid_views[cell] >= 3)
          worst = std::max(worst, vol.cost[cell]);
      }
  CHECK(worst < 1e-10);
}

TEST_CASE("bitwise-identical samples give exactly zero cost") {
  RasterF flat(64, 64, 1, 0.5f);
  RpcModel m = make_passthrough_rpc();
  fit_inverse_rpc(m);
  std::vector<SweepView> views = {{&flat, &m, 0, 0}, {&flat, &m, 0, 0}};
  SweepConfig cfg;
  cfg.pyramid_factors = {1};
  std::vector<FeaturePyramid> pyr = {
      extract_features(flat, cfg.pyramid_factors),
      extract_features(flat, cfg.pyramid_factors)};
  StagePlanes planes;
  planes.count = 2;
  planes.shared = {100.0, 500.0};
  const CostVolume vol = sweep_stage(views, pyr, 0, 0, planes, cfg);
  for (size_t i = 0; i < vol.cost.size(); ++i)
    if (vol.valid_views[i] >= 2) CHECK(vol.cost[i] == 0.0);
}

TEST_CASE("argmin plane lands within one interval of the true height") {
  const SyntheticScene& s = small_scene();
  const std::vector<SweepView> views = scene_views(s);
  SweepConfig cfg;
  cfg.pyramid_factors = {4};
  cfg.threads = 1;
  std::vector<FeaturePyramid> pyr;
  for (auto& v : views)
    pyr.push_back(extract_features(*v.image, cfg.pyramid_factors));
  StagePlanes planes;
  planes.count = 48;
  const double d_min = -150, d_max = 450;  // covers the terrain span
  for (int d = 0; d < planes.count; ++d)
    planes.shared.push_back(d_min + (d_max - d_min) * d / (planes.count - 1));
  const double interval = (d_max - d_min) / (planes.count - 1);
  CostVolume vol = sweep_stage(views, pyr, 0, 0, planes, cfg);
  vol = aggregate_cost(vol, 2, cfg.min_valid_views, 1);
  int total = 0, within = 0;
  for (int y = 8; y < vol.height - 8; ++y)
    for (int x = 8; x < vol.width - 8; ++x) {
      const double truth = true_height_at(s, x, y, 4);
      if (!std::isfinite(truth)) continue;
      double cmin = 1e300;
      int dmin = -1;
      for (int d = 0; d < planes.count; ++d) {
        const size_t cell = vol.idx(x, y, d);
        if (vol.valid_views[cell] >= 2 && vol.cost[cell] < cmin) {
          cmin = vol.cost[cell];
          dmin = d;
        }
      }
      if (dmin < 0) continue;
      ++total;
      if (std::fabs(planes.shared[dmin] - truth) <= interval) ++within;
    }
  REQUIRE(total > 500);
  CHECK(static_cast<double>(within) / total >= 0.95);
}

TEST_CASE("a source with no overlap at all raises an empty-volume error") {
  const SyntheticScene& s = small_scene();
  RpcModel far_model = s.views[1].rpc;
  far_model.lat_off += 10.0;  // a completely different footprint
  std::vector<SweepView> views = {{&s.views[0].image, &s.views[0].rpc, 0, 0},
                                  {&s.views[1].image, &far_model, 0, 0}};
  SweepConfig cfg;
  cfg.pyramid_factors = {4};
  std::vector<FeaturePyramid> pyr;
  for (auto& v : views)
    pyr.push_back(extract_features(*v.image, cfg.pyramid_factors));
  StagePlanes planes;
  planes.count = 2;
  planes.shared = {50.0, 150.0};
  CHECK_THROWS_WITH_AS(sweep_stage(views, pyr, 0, 0, planes, cfg),
                       doctest::Contains("empty"), Error);
}

TEST_CASE("source order cannot change the cost volume bits") {
  const SyntheticScene& s = small_scene();
  SweepConfig cfg;
  cfg.pyramid_factors = {4};
  std::vector<SweepView> order_a = {{&s.views[0].image, &s.views[0].rpc, 0, 0},
                                    {&s.views[1].image, &s.views[1].rpc, 0, 0},
                                    {&s.views[2].image, &s.views[2].rpc, 0, 0}};
  std::vector<SweepView> order_b = {{&s.views[0].image, &s.views[0].rpc, 0, 0},
                                    {&s.views[2].image, &s.views[2].rpc, 0, 0},
                                    {&s.views[1].image, &s.views[1].rpc, 0, 0}};
  StagePlanes planes;
  planes.count = 4;
  planes.shared = {0.0, 100.0, 200.0, 300.0};
  auto run = [&](const std::vector<SweepView>& views) {
    std::vector<FeaturePyramid> pyr;
    for (auto& v : views)
      pyr.push_back(extract_features(*v.image, cfg.pyramid_factors));
    return sweep_stage(views, pyr, 0, 0, planes, cfg);
  };
  const CostVolume a = run(order_a);
  const CostVolume b = run(order_b);
  REQUIRE(a.cost.size() == b.cost.size());
  for (size_t i = 0; i < a.cost.size(); ++i) CHECK(a.cost[i] == b.cost[i]);
}

TEST_CASE("aggregation with radius zero is the identity") {
  const std::vector<double> planes = {10, 20};
  CostVolume vol = tiny_volume(6, 5, planes);
  std::mt19937_64 rng(4);
  for (double& c : vol.cost) c = urand(rng, 0, 1);
  const CostVolume out = aggregate_cost(vol, 0);
  CHECK(out.cost == vol.cost);
}

TEST_CASE("aggregation leaves a constant volume unchanged") {
  CostVolume vol = tiny_volume(7, 7, {5.0});
  for (double& c : vol.cost) c = 0.625;  // exactly representable
  for (int radius : {1, 2, 3}) {
    const CostVolume out = aggregate_cost(vol, radius);
    for (double c : out.cost)
      CHECK(c == doctest::Approx(0.625).epsilon(1e-15));
  }
}

TEST_CASE("an impulse spreads over a 3x3 window with unit weight") {
  CostVolume vol = tiny_volume(5, 5, {0.0});
  vol.cost[vol.idx(2, 2, 0)] = 9.0;
  const CostVolume out = aggregate_cost(vol, 1);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) {
      const bool touched = std::abs(x - 2) <= 1 && std::abs(y - 2) <= 1;
      // cells next to the impulse all see full 3x3 windows: 9 / 9 = 1
      CHECK(out.cost[out.idx(x, y, 0)] ==
            doctest::Approx(touched ? 1.0 : 0.0).epsilon(1e-15));
    }
}

TEST_CASE("soft argmin snaps to an isolated zero-cost plane") {
  CostVolume vol = tiny_volume(1, 1, {100.0, 250.0, 400.0, 550.0});
  for (double& c : vol.cost) c = 1e6;
  vol.cost[vol.idx(0, 0, 2)] = 0.0;
  const HeightMap hm = soft_argmin(vol, 1.0);
  CHECK(std::fabs(hm.height_m[0] - 400.0) < 1e-9);
  CHECK(hm.valid[0] == 1);
}

TEST_CASE("uniform costs regress to the mean plane height") {
  CostVolume vol = tiny_volume(1, 1, {100.0, 200.0, 600.0});
  for (double& c : vol.cost) c = 0.4;
  const HeightMap hm = soft_argmin(vol, 1.0);
  CHECK(hm.height_m[0] == doctest::Approx(300.0).epsilon(1e-12));
}

TEST_CASE("two tied minima average their plane heights") {
  CostVolume vol = tiny_volume(1, 1, {100.0, 200.0, 300.0, 400.0});
  vol.cost = {1e6, 0.0, 1e6, 0.0};
  const HeightMap hm = soft_argmin(vol, 1.0);
  CHECK(hm.height_m[0] == doctest::Approx(300.0).epsilon(1e-12));
}

TEST_CASE("vanishing temperature converges to the hard argmin") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    CostVolume vol = tiny_volume(1, 1, {0, 10, 20, 30, 40, 50, 60, 70});
    int best = 0;
    for (int d = 0; d < 8; ++d) {
      vol.cost[d] = urand(rng, 0.1, 1.0);
      if (vol.cost[d] < vol.cost[best]) best = d;
    }
    const HeightMap hm = soft_argmin(vol, 1e-4);
    CHECK(std::fabs(hm.height_m[0] - vol.plane_height[best]) < 1e-9);
  }
}

TEST_CASE("regressed heights stay inside the hypothesis range") {
  std::mt19937_64 rng(6);
  CostVolume vol = tiny_volume(8, 8, {-30, -10, 10, 30, 50, 70});
  for (double& c : vol.cost) c = urand(rng, 0, 2);
  for (double T : {0.01, 0.5, 10.0}) {
    const HeightMap hm = soft_argmin(vol, T);
    for (double h : hm.height_m) {
      CHECK(h >= -30.0);
      CHECK(h <= 70.0);
    }
  }
}

TEST_CASE("non-positive temperature is rejected") {
  CostVolume vol = tiny_volume(1, 1, {0.0});
  CHECK_THROWS_WITH_AS(soft_argmin(vol, 0.0),
                       doctest::Contains("temperature"), Error);
}

TEST_CASE("flat terrain regresses within half the finest interval") {
  SceneParams p;
  p.image_size = 256;
  p.relief = 0;
  p.base_height = 500;
  p.terrain_seed = 11;
  p.texture_seed = 12;
  const SyntheticScene s = gen_scene(p);
  const std::vector<SweepView> views = scene_views(s);
  SweepConfig cfg;
  cfg.pyramid_factors = {8, 4, 1};
  cfg.stages = {{64, 0.0}, {32, 5.0}, {8, 2.5}};
  cfg.threads = 1;
  const HeightMap hm = run_multistage(views, 0, -850, 1150, cfg);
  int total = 0, good = 0;
  for (int y = 80; y < 176; ++y)
    for (int x = 80; x < 176; ++x) {
      if (!hm.valid[hm.idx(x, y)]) continue;
      ++total;
      if (std::fabs(hm.height_m[hm.idx(x, y)] - 500.0) <= 1.25) ++good;
    }
  REQUIRE(total > 5000);
  CHECK(static_cast<double>(good) / total >= 0.98);
}

TEST_CASE("ramp terrain reconstructs within one finest interval") {
  SceneParams p;
  p.image_size = 256;
  p.relief = 200;
  p.terrain_bumps = 0;
  p.ramp_frac = 1.0;
  p.terrain_seed = 13;
  p.texture_seed = 14;
  const SyntheticScene s = gen_scene(p);
  const std::vector<SweepView> views = scene_views(s);
  SweepConfig cfg;
  cfg.pyramid_factors = {8, 4, 1};
  cfg.stages = {{64, 0.0}, {32, 5.0}, {8, 2.5}};
  cfg.threads = 1;
  const HeightMap hm = run_multistage(views, 0, -850, 1150, cfg);
  double sum = 0;
  int n = 0;
  for (int y = 48; y < 208; ++y)
    for (int x = 48; x < 208; ++x) {
      if (!hm.valid[hm.idx(x, y)]) continue;
      const float truth = s.views[0].true_height.at(x, y);
      if (!std::isfinite(truth)) continue;
      sum += std::fabs(hm.height_m[hm.idx(x, y)] - truth);
      ++n;
    }
  REQUIRE(n > 10000);
  CHECK(sum / n <= 2.5);
}

TEST_CASE("a single stage equals the explicit composition") {
  const SyntheticScene& s = small_scene();
  const std::vector<SweepView> views = scene_views(s);
  SweepConfig cfg;
  cfg.pyramid_factors = {4};
  cfg.stages = {{16, 0.0}};
  cfg.threads = 1;
  const double d_min = -150, d_max = 450;
  const HeightMap via_multistage =
      run_multistage(views, 0, d_min, d_max, cfg);

  std::vector<FeaturePyramid> pyr;
  for (auto& v : views)
    pyr.push_back(extract_features(*v.image, cfg.pyramid_factors));
  StagePlanes planes;
  planes.count = 16;
  for (int d = 0; d < 16; ++d)
    planes.shared.push_back(d_min + (d_max - d_min) * d / 15.0);
  CostVolume vol = sweep_stage(views, pyr, 0, 0, planes, cfg);
  vol = aggregate_cost(vol, cfg.aggregation_radius, cfg.min_valid_views,
                       cfg.threads);
  const HeightMap direct = soft_argmin(vol, cfg.temperature,
                                       cfg.min_valid_views, cfg.threads);
  REQUIRE(via_multistage.height_m.size() == direct.height_m.size());
  for (size_t i = 0; i < direct.height_m.size(); ++i) {
    CHECK(via_multistage.height_m[i] == direct.height_m[i]);
    CHECK(via_multistage.valid[i] == direct.valid[i]);
  }
}

TEST_CASE("refinement does not lose more than the coarse interval") {
  const SyntheticScene& s = small_scene();
  const std::vector<SweepView> views = scene_views(s);
  const double d_min = -850, d_max = 1150;

  auto mae_of = [&](const HeightMap& hm) {
    double sum = 0;
    int n = 0;
    const int f = hm.level_factor;
    const int margin = 64 / f;
    for (int y = margin; y < hm.height - margin; ++y)
      for (int x = margin; x < hm.width - margin; ++x) {
        if (!hm.valid[hm.idx(x, y)]) continue;
        const double truth = true_height_at(s, x, y, f);
        if (!std::isfinite(truth)) continue;
        sum += std::fabs(hm.height_m[hm.idx(x, y)] - truth);
        ++n;
      }
    return sum / n;
  };

  SweepConfig coarse;
  coarse.pyramid_factors = {8};
  coarse.stages = {{64, 0.0}};
  coarse.threads = 1;
  const double mae_coarse =
      mae_of(run_multistage(views, 0, d_min, d_max, coarse));

  SweepConfig fine;
  fine.pyramid_factors = {8, 4};
  fine.stages = {{64, 0.0}, {32, 5.0}};
  fine.threads = 1;
  const double mae_fine =
      mae_of(run_multistage(views, 0, d_min, d_max, fine));

  const double coarse_interval = (d_max - d_min) / 64.0;
  CHECK(mae_fine <= mae_coarse + coarse_interval);
}

TEST_CASE("height maps round-trip through PFM with a sidecar") {
  namespace fs = std::filesystem;
  HeightMap hm;
  hm.width = 9;
  hm.height = 7;
  hm.level_factor = 4;
  std::mt19937_64 rng(7);
  for (int i = 0; i < 63; ++i) {
    hm.height_m.push_back(std::floor(urand(rng, -500, 1500) * 16) / 16.0);
    hm.valid.push_back(i % 5 == 0 ? 0 : 1);
  }
  const fs::path dir = fs::temp_directory_path() / "satsweep_hm";
  fs::create_directories(dir);
  const std::string path = (dir / "h.pfm").string();
  SweepConfig cfg;
  const HeightPlaneSchedule sched = build_schedule(-500, 1500, cfg);
  write_height_map(hm, path, &sched);
  const HeightMap back = read_height_map(path);
  CHECK(back.width == hm.width);
  CHECK(back.height == hm.height);
  CHECK(back.level_factor == hm.level_factor);
  for (int i = 0; i < 63; ++i) {
    CHECK(back.valid[i] == hm.valid[i]);
    if (hm.valid[i])
      CHECK(back.height_m[i] ==
            doctest::Approx(hm.height_m[i]).epsilon(1e-6));
  }
  fs::remove_all(dir);
}

}  // TEST_SUITE
