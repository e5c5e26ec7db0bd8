// satsweep: RPC geometry and plane-sweep DSM reconstruction for push-broom
// satellite imagery. Thin shell over the library; exit codes: 0 success,
// 1 runtime failure, 2 usage/validation error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "satsweep/dsm.h"
#include "satsweep/geodesy.h"
#include "satsweep/parallel.h"
#include "satsweep/pinhole_fit.h"
#include "satsweep/pipeline.h"
#include "satsweep/raster_io.h"
#include "satsweep/rpc_model.h"
#include "satsweep/sweep.h"
#include "satsweep/synthetic.h"
#include "satsweep/tensor_warp.h"

using namespace satsweep;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<PipelineView> load_views(const std::vector<std::string>& images,
                                     const std::vector<std::string>& rpcs) {
  if (images.size() != rpcs.size() || images.size() < 2)
    throw UsageError("need matching --image and --rpc lists (at least 2)");
  std::vector<PipelineView> views;
  for (size_t i = 0; i < images.size(); ++i) {
    PipelineView v;
    v.image = read_pgm(images[i]);
    // normalize raw counts to [0, 1] so config defaults are scale-free
    float vmax = 1.0f;
    for (float x : v.image.data) vmax = std::max(vmax, x);
    for (float& x : v.image.data) x /= vmax;
    v.rpc = parse_rpc_file(rpcs[i]);
    views.push_back(std::move(v));
  }
  return views;
}

PipelineConfig make_config(const std::string& config_path, int threads,
                           double temperature, int agg_radius) {
  PipelineConfig cfg;
  if (!config_path.empty()) cfg = load_pipeline_config(config_path);
  if (threads > 0) cfg.threads = threads;
  if (cfg.threads <= 0) cfg.threads = default_thread_count();
  if (temperature > 0) cfg.sweep.temperature = temperature;
  if (agg_radius >= 0) cfg.sweep.aggregation_radius = agg_radius;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RPC geometry and plane-sweep DSM toolkit"};
  app.require_subcommand(1);

  // ---- project / localize -------------------------------------------------
  std::string rpc_path;
  double arg_lat = 0, arg_lon = 0, arg_hei = 0, arg_samp = 0, arg_line = 0;
  double arg_tol = 1e-8;

  auto* project = app.add_subcommand("project", "ground -> image");
  project->add_option("--rpc", rpc_path)->required();
  project->add_option("--lat", arg_lat)->required();
  project->add_option("--lon", arg_lon)->required();
  project->add_option("--hei", arg_hei)->required();

  auto* localize_cmd =
      app.add_subcommand("localize", "image + height -> ground");
  localize_cmd->add_option("--rpc", rpc_path)->required();
  localize_cmd->add_option("--samp", arg_samp)->required();
  localize_cmd->add_option("--line", arg_line)->required();
  localize_cmd->add_option("--hei", arg_hei)->required();
  localize_cmd->add_option("--tol", arg_tol);

  // ---- fit-inverse ---------------------------------------------------------
  std::string out_path;
  std::vector<int> inv_grid{11, 11, 9};
  auto* fit_inverse_cmd = app.add_subcommand(
      "fit-inverse", "fit inverse coefficients into an RPC file");
  fit_inverse_cmd->add_option("--rpc", rpc_path)->required();
  fit_inverse_cmd->add_option("--out", out_path)->required();
  fit_inverse_cmd->add_option("--grid", inv_grid)->expected(3);

  // ---- warp ----------------------------------------------------------------
  std::string src_rpc_path, ref_rpc_path;
  bool warp_jacobian = false;
  auto* warp_cmd = app.add_subcommand(
      "warp", "source pixel -> reference view through a height plane");
  warp_cmd->add_option("--src-rpc", src_rpc_path)->required();
  warp_cmd->add_option("--ref-rpc", ref_rpc_path)->required();
  warp_cmd->add_option("--samp", arg_samp)->required();
  warp_cmd->add_option("--line", arg_line)->required();
  warp_cmd->add_option("--hei", arg_hei)->required();
  warp_cmd->add_flag("--jacobian", warp_jacobian,
                     "also print d(samp,line)/dhei");

  // ---- fit-pinhole -----------------------------------------------------------
  std::vector<double> patch_sizes;
  std::string out_dir = ".";
  double fp_hmin = 0, fp_hmax = 0;
  auto* fit_pinhole_cmd = app.add_subcommand(
      "fit-pinhole", "pin-hole fitting error study over patch sizes");
  fit_pinhole_cmd->add_option("--rpc", rpc_path)->required();
  fit_pinhole_cmd->add_option("--sizes", patch_sizes, "patch edge lengths, px")
      ->required();
  fit_pinhole_cmd->add_option("--out-dir", out_dir);
  auto* fp_hmin_opt = fit_pinhole_cmd->add_option("--h-min", fp_hmin);
  fit_pinhole_cmd->add_option("--h-max", fp_hmax)->needs(fp_hmin_opt);

  // ---- sweep -----------------------------------------------------------------
  std::vector<std::string> image_paths, rpc_paths;
  std::string config_path, out_height = "height.pfm";
  int ref_index = 0;
  int threads = 0;
  double temperature = -1;
  int agg_radius = -1;
  double d_min = 0, d_max = 0;
  auto* sweep_cmd = app.add_subcommand(
      "sweep", "multi-stage height map for one reference view");
  sweep_cmd->add_option("--image", image_paths)->required();
  sweep_cmd->add_option("--rpc", rpc_paths)->required();
  sweep_cmd->add_option("--ref", ref_index);
  sweep_cmd->add_option("--config", config_path);
  sweep_cmd->add_option("--out", out_height);
  sweep_cmd->add_option("--threads", threads);
  sweep_cmd->add_option("--temperature", temperature);
  sweep_cmd->add_option("--radius", agg_radius);
  auto* rng_opt = sweep_cmd->add_option("--d-min", d_min);
  sweep_cmd->add_option("--d-max", d_max)->needs(rng_opt);

  // ---- pipeline ----------------------------------------------------------------
  std::vector<double> aoi_args;
  std::string gt_path;
  auto* pipeline_cmd =
      app.add_subcommand("pipeline", "block-wise DSM production");
  pipeline_cmd->add_option("--image", image_paths)->required();
  pipeline_cmd->add_option("--rpc", rpc_paths)->required();
  pipeline_cmd->add_option("--aoi", aoi_args, "lat0 lon0 lat1 lon1 (degrees)")
      ->expected(4)
      ->required();
  pipeline_cmd->add_option("--config", config_path);
  pipeline_cmd->add_option("--gt", gt_path, "ground-truth ASCII grid");
  pipeline_cmd->add_option("--out-dir", out_dir);
  pipeline_cmd->add_option("--threads", threads);
  pipeline_cmd->add_option("--temperature", temperature);
  pipeline_cmd->add_option("--radius", agg_radius);

  // ---- eval -------------------------------------------------------------------
  std::string est_path;
  auto* eval_cmd = app.add_subcommand("eval", "DSM accuracy metrics");
  eval_cmd->add_option("--dsm", est_path)->required();
  eval_cmd->add_option("--gt", gt_path)->required();
  eval_cmd->add_option("--out", out_path);

  // ---- synth ---------------------------------------------------------------------
  uint64_t seed = 1;
  int synth_size = 512;
  double synth_relief = 300.0;
  double synth_gsd = 2.5;
  auto* synth_cmd =
      app.add_subcommand("synth", "generate a synthetic scene bundle");
  synth_cmd->add_option("--out-dir", out_dir)->required();
  synth_cmd->add_option("--seed", seed);
  synth_cmd->add_option("--size", synth_size);
  synth_cmd->add_option("--relief", synth_relief);
  synth_cmd->add_option("--gsd", synth_gsd);
  synth_cmd->add_option("--threads", threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (*project) {
      const RpcModel m = parse_rpc_file(rpc_path);
      const ImagePoint q = project_forward(m, {arg_lat, arg_lon, arg_hei});
      std::printf("%.6f %.6f\n", q.samp, q.line);
    } else if (*localize_cmd) {
      const RpcModel m = parse_rpc_file(rpc_path);
      const GroundPoint g =
          localize_iterative(m, {arg_samp, arg_line}, arg_hei, arg_tol);
      std::printf("%.6f %.6f\n", g.lat, g.lon);
    } else if (*fit_inverse_cmd) {
      RpcModel m = parse_rpc_file(rpc_path);
      const InverseFitReport rep =
          fit_inverse_rpc(m, {inv_grid[0], inv_grid[1], inv_grid[2]});
      write_rpc_file(m, out_path);
      std::printf(
          "max_residual_norm %.3e rms_residual_norm %.3e max_residual_px "
          "%.3e\n",
          rep.max_residual_norm, rep.rms_residual_norm, rep.max_residual_px);
    } else if (*warp_cmd) {
      RpcModel src = parse_rpc_file(src_rpc_path);
      const RpcModel ref = parse_rpc_file(ref_rpc_path);
      if (!src.has_inverse) fit_inverse_rpc(src);
      const ImagePoint q = warp_point(src, ref, {arg_samp, arg_line}, arg_hei);
      std::printf("%.6f %.6f\n", q.samp, q.line);
      if (warp_jacobian) {
        double ds, dl;
        jacobian_wrt_height(src, ref, {arg_samp, arg_line}, arg_hei, ds, dl);
        std::printf("jacobian %.9f %.9f\n", ds, dl);
      }
    } else if (*fit_pinhole_cmd) {
      if (patch_sizes.empty()) throw UsageError("empty patch size list");
      const RpcModel m = parse_rpc_file(rpc_path);
      if (!fp_hmin_opt->count()) {
        fp_hmin = m.height_min;
        fp_hmax = m.height_max;
      }
      std::filesystem::create_directories(out_dir);
      std::printf("size_px max_err_px mean_err_px rms_err_px\n");
      for (double size : patch_sizes) {
        if (!(size > 1)) throw UsageError("bad patch size");
        const PixelRect patch{m.samp_off - size / 2, m.line_off - size / 2,
                              size, size};
        const PinholeFitResult res = fit_pinhole(m, patch, fp_hmin, fp_hmax);
        const std::string stem =
            out_dir + "/pinhole_" + std::to_string(static_cast<long>(size));
        write_fit_report_json(res.report, stem + ".json");
        write_fit_report_csv(res.report, stem + ".csv");
        std::printf("%ld %.5f %.5f %.5f\n", static_cast<long>(size),
                    res.report.max_err, res.report.mean_err,
                    res.report.rms_err);
      }
    } else if (*sweep_cmd) {
      PipelineConfig cfg =
          make_config(config_path, threads, temperature, agg_radius);
      std::vector<PipelineView> views = load_views(image_paths, rpc_paths);
      if (ref_index < 0 || ref_index >= static_cast<int>(views.size()))
        throw UsageError("--ref out of range");
      std::vector<RpcModel> models;
      for (PipelineView& v : views) {
        if (!v.rpc.has_inverse) fit_inverse_rpc(v.rpc);
        models.push_back(v.rpc);
      }
      std::vector<SweepView> sviews;
      for (size_t i = 0; i < views.size(); ++i)
        sviews.push_back({&views[i].image, &models[i], 0.0, 0.0});
      double lo = d_min, hi = d_max;
      if (!rng_opt->count()) {
        lo = -1e300;
        hi = 1e300;
        for (const RpcModel& m : models) {
          lo = std::max(lo, m.height_min);
          hi = std::min(hi, m.height_max);
        }
      }
      SweepConfig scfg = cfg.sweep;
      scfg.threads = cfg.threads;
      const HeightMap hm = run_multistage(sviews, ref_index, lo, hi, scfg);
      const HeightPlaneSchedule sched = build_schedule(lo, hi, scfg);
      write_height_map(hm, out_height, &sched);
      std::printf("height map written to %s\n", out_height.c_str());
    } else if (*pipeline_cmd) {
      PipelineConfig cfg =
          make_config(config_path, threads, temperature, agg_radius);
      const std::vector<PipelineView> views =
          load_views(image_paths, rpc_paths);
      const LatLonRect aoi{aoi_args[0], aoi_args[1], aoi_args[2], aoi_args[3]};
      if (aoi.empty()) throw UsageError("empty AOI");
      Dsm gt;
      const bool have_gt = !gt_path.empty();
      if (have_gt) gt = read_esri_grid(gt_path);
      std::filesystem::create_directories(out_dir);

      const PipelineResult res =
          run_pipeline(views, aoi, cfg, have_gt ? &gt : nullptr);
      write_esri_grid(res.dsm, out_dir + "/dsm.asc");
      for (size_t r = 0; r < res.ref_height_maps.size(); ++r)
        write_height_map(res.ref_height_maps[r],
                         out_dir + "/height_ref" + std::to_string(r) + ".pfm");
      if (res.has_metrics) {
        std::ofstream mf(out_dir + "/metrics.json");
        mf << metrics_to_json(res.metrics, res.runtime_seconds);
        std::printf(
            "MAE %.3f m RMSE %.3f m <2.5m %.2f%% <7.5m %.2f%% Comp. %.2f%%\n",
            res.metrics.mae, res.metrics.rmse, res.metrics.pct_below_2_5,
            res.metrics.pct_below_7_5, res.metrics.completeness);
      }
      for (const std::string& err : res.block_errors)
        std::fprintf(stderr, "warning: %s\n", err.c_str());
      std::printf("dsm written to %s/dsm.asc (%.1f s)\n", out_dir.c_str(),
                  res.runtime_seconds);
    } else if (*eval_cmd) {
      const Dsm est = read_esri_grid(est_path);
      const Dsm gt = read_esri_grid(gt_path);
      const DsmMetrics m = evaluate_dsm(est, gt);
      const std::string text = metrics_to_json(m, 0.0);
      if (!out_path.empty()) {
        std::ofstream out(out_path);
        out << text;
      }
      std::fputs(text.c_str(), stdout);
    } else if (*synth_cmd) {
      SceneParams params;
      params.terrain_seed = seed;
      params.texture_seed = seed + 1;
      params.image_size = synth_size;
      params.relief = synth_relief;
      params.gsd = synth_gsd;
      params.threads = threads > 0 ? threads : default_thread_count();
      const SyntheticScene scene = gen_scene(params);
      write_scene_bundle(scene, out_dir);
      std::printf("scene bundle written to %s\n", out_dir.c_str());
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    // validation-flavored failures (bad inputs/files) exit 2
    const std::string msg = e.what();
    const bool validation =
        msg.find("cannot open") != std::string::npos ||
        msg.find("missing key") != std::string::npos ||
        msg.find("coefficient count") != std::string::npos ||
        msg.find("bad header") != std::string::npos ||
        msg.find("bad magic") != std::string::npos ||
        msg.find("truncated") != std::string::npos ||
        msg.find("config") != std::string::npos ||
        msg.find("empty AOI") != std::string::npos;
    return validation ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
