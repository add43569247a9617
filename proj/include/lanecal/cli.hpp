#pragma once

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lanecal/io.hpp"
#include "lanecal/montecarlo.hpp"
#include "lanecal/pipeline.hpp"
#include "lanecal/synth.hpp"

namespace lanecal::cli {

namespace detail {

inline std::string frame_filename(const std::string& dir, int frame) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "/frame_%04d.pgm", frame);
  return dir + buf;
}

}  // namespace detail

/// Entry point shared by the binary and the tests. args excludes argv[0].
inline int run(const std::vector<std::string>& args) {
  CLI::App app{"online camera-to-road extrinsic calibration from lane boundary observations"};
  app.require_subcommand(1);

  // --- synth -----------------------------------------------------------
  SceneConfig scene;
  std::string synth_out, synth_intrinsics_out, synth_render_dir;
  double noise_var = 0.0;
  auto* synth = app.add_subcommand("synth", "generate a synthetic observation sequence");
  synth->add_option("--frames", scene.n_frames, "number of frames");
  synth->add_option("--noise-var", noise_var, "endpoint noise variance in px^2");
  synth->add_option("--seed", scene.rng_seed, "RNG seed");
  synth->add_option("--out", synth_out, "output JSONL path")->required();
  synth->add_option("--image-width", scene.image_width, "image width in px");
  synth->add_option("--image-height", scene.image_height, "image height in px");
  synth->add_option("--lanes", scene.n_lanes, "number of lanes");
  synth->add_option("--lane-width", scene.lane_width_m, "lane width in meters");
  synth->add_option("--point-spacing", scene.point_spacing_px, "point spacing along boundaries, px");
  synth->add_option("--max-pairs", scene.max_pairs_per_boundary, "max segments per boundary");
  synth->add_option("--min-segment", scene.min_segment_px, "minimum segment length in px");
  synth->add_option("--outlier-fraction", scene.outlier_fraction,
                    "fraction of emitted segments that are injected outliers");
  double pitch0_deg = rad2deg(scene.pitch0_rad), yaw0_deg = rad2deg(scene.yaw0_rad);
  double roll0_deg = rad2deg(scene.roll0_rad), pitch_amp_deg = rad2deg(scene.pitch_amp_rad);
  double yaw_amp_deg = rad2deg(scene.yaw_amp_rad), roll_amp_deg = rad2deg(scene.roll_amp_rad);
  synth->add_option("--pitch-deg", pitch0_deg, "nominal pitch (deg)");
  synth->add_option("--yaw-deg", yaw0_deg, "nominal yaw (deg)");
  synth->add_option("--roll-deg", roll0_deg, "nominal roll (deg)");
  synth->add_option("--height", scene.height0_m, "nominal camera height (m)");
  synth->add_option("--pitch-amp-deg", pitch_amp_deg, "pitch sinusoid amplitude (deg)");
  synth->add_option("--yaw-amp-deg", yaw_amp_deg, "yaw sinusoid amplitude (deg)");
  synth->add_option("--roll-amp-deg", roll_amp_deg, "roll sinusoid amplitude (deg)");
  synth->add_option("--height-amp", scene.height_amp_m, "height sinusoid amplitude (m)");
  synth->add_option("--period", scene.motion_period_frames, "motion period in frames");
  synth->add_option("--intrinsics-out", synth_intrinsics_out, "also write the intrinsics JSON");
  synth->add_option("--render-dir", synth_render_dir, "write PGM renderings into this directory");
  synth->callback([&] {
    scene.noise_var_px2 = noise_var;
    scene.pitch0_rad = deg2rad(pitch0_deg);
    scene.yaw0_rad = deg2rad(yaw0_deg);
    scene.roll0_rad = deg2rad(roll0_deg);
    scene.pitch_amp_rad = deg2rad(pitch_amp_deg);
    scene.yaw_amp_rad = deg2rad(yaw_amp_deg);
    scene.roll_amp_rad = deg2rad(roll_amp_deg);
    io::write_observations(generate_sequence(scene), synth_out);
    if (!synth_intrinsics_out.empty()) io::write_intrinsics(scene.intrinsics, synth_intrinsics_out);
    if (!synth_render_dir.empty())
      for (int t = 0; t < scene.n_frames; ++t)
        write_pnm(render_frame(scene, t), detail::frame_filename(synth_render_dir, t));
  });

  // --- calibrate ---------------------------------------------------------
  std::string cal_intrinsics, cal_obs, cal_trace;
  PipelineConfig pipe;
  auto* cal = app.add_subcommand("calibrate", "run the sequential estimator over a sequence");
  cal->add_option("--intrinsics", cal_intrinsics, "intrinsics JSON")->required();
  cal->add_option("--obs", cal_obs, "observations JSONL")->required();
  cal->add_option("--trace", cal_trace, "output trace CSV")->required();
  cal->add_option("--lane-width", pipe.lane_width_prior, "lane width prior in meters");
  cal->add_option("--seed", pipe.ransac.rng_seed, "RANSAC seed");
  cal->add_option("--n-loop", pipe.ransac.n_loop, "RANSAC iterations");
  cal->callback([&] {
    pipe.intrinsics = io::read_intrinsics(cal_intrinsics);
    Calibrator calib(pipe);
    std::vector<io::TraceRow> rows;
    for (const auto& obs : io::read_observations(cal_obs))
      rows.push_back(io::make_trace_row(calib.process_frame(obs)));
    io::write_trace(rows, cal_trace);
  });

  // --- eval --------------------------------------------------------------
  std::string eval_trace, eval_obs, eval_out;
  int eval_burn_in = 20;
  auto* ev = app.add_subcommand("eval", "RMSE of a trace against ground truth");
  ev->add_option("--trace", eval_trace, "trace CSV")->required();
  ev->add_option("--obs", eval_obs, "observations JSONL with ground truth")->required();
  ev->add_option("--out", eval_out, "output RMSE JSON")->required();
  ev->add_option("--burn-in", eval_burn_in, "frames excluded from the RMSE");
  ev->callback([&] {
    const auto report = io::evaluate_trace(io::read_trace(eval_trace),
                                           io::read_observations(eval_obs), eval_burn_in);
    io::write_rmse_report(report, eval_out);
  });

  // --- montecarlo ----------------------------------------------------------
  SceneConfig mc_scene;
  PipelineConfig mc_pipe;
  std::string mc_out;
  double mc_noise_var = 1.0;
  int mc_runs = 20, mc_threads = 0;
  auto* mc = app.add_subcommand("montecarlo", "RMSE over repeated synthetic runs");
  mc->add_option("--runs", mc_runs, "number of independent runs");
  mc->add_option("--noise-var", mc_noise_var, "endpoint noise variance in px^2");
  mc->add_option("--seed", mc_scene.rng_seed, "base RNG seed");
  mc->add_option("--frames", mc_scene.n_frames, "frames per run");
  mc->add_option("--burn-in", mc_pipe.burn_in, "frames excluded from the RMSE");
  mc->add_option("--lane-width", mc_scene.lane_width_m, "lane width in meters (scene and prior)");
  mc->add_option("--threads", mc_threads, "worker threads (0 = hardware)");
  mc->add_option("--out", mc_out, "output RMSE JSON")->required();
  mc->callback([&] {
    mc_scene.noise_var_px2 = mc_noise_var;
    mc_pipe.lane_width_prior = mc_scene.lane_width_m;
    mc_pipe.intrinsics = mc_scene.intrinsics;
    const auto report = run_monte_carlo(mc_scene, mc_runs, mc_pipe, mc_threads);
    for (const auto& f : report.failures) std::cerr << f << "\n";
    io::write_rmse_report(report.rmse, mc_out);
    if (!report.failures.empty())
      fail(ErrorCode::NonConvergence,
           std::to_string(report.failures.size()) + " of " + std::to_string(mc_runs) +
               " runs failed");
  });

  // --- ipm -----------------------------------------------------------------
  std::string ipm_intrinsics, ipm_trace, ipm_out, ipm_image, ipm_warp_out;
  double ipm_pitch = 0.0, ipm_yaw = 0.0, ipm_roll = 0.0, ipm_height = 1.5;
  int ipm_frame = 0, ipm_w = 600, ipm_h = 600;
  BevConfig bev;
  auto* ipm = app.add_subcommand("ipm", "emit a BEV homography and optionally warp an image");
  ipm->add_option("--intrinsics", ipm_intrinsics, "intrinsics JSON")->required();
  ipm->add_option("--out", ipm_out, "output homography JSON")->required();
  auto* opt_trace = ipm->add_option("--trace", ipm_trace, "take extrinsics from this trace CSV");
  ipm->add_option("--frame", ipm_frame, "frame to take from the trace");
  ipm->add_option("--pitch-deg", ipm_pitch, "pitch (deg)");
  ipm->add_option("--yaw-deg", ipm_yaw, "yaw (deg)");
  ipm->add_option("--roll-deg", ipm_roll, "roll (deg)");
  ipm->add_option("--height", ipm_height, "camera height (m)");
  ipm->add_option("--ax", bev.a_x, "lateral scale, px per meter");
  ipm->add_option("--az", bev.a_z, "forward scale, px per meter");
  ipm->add_option("--bx", bev.b_x, "lateral extent, meters");
  ipm->add_option("--bz", bev.b_z, "forward extent, meters");
  ipm->add_option("--image", ipm_image, "input PGM/PPM to warp");
  ipm->add_option("--warp-out", ipm_warp_out, "output PGM/PPM path");
  ipm->add_option("--out-width", ipm_w, "warped image width");
  ipm->add_option("--out-height", ipm_h, "warped image height");
  ipm->callback([&] {
    const CameraIntrinsics k = io::read_intrinsics(ipm_intrinsics);
    if (!opt_trace->empty()) {
      bool found = false;
      for (const auto& row : io::read_trace(ipm_trace)) {
        if (row.frame != ipm_frame) continue;
        ipm_pitch = row.pitch_deg;
        ipm_yaw = row.yaw_deg;
        ipm_roll = row.roll_deg;
        ipm_height = row.height_m;
        found = true;
        break;
      }
      if (!found)
        fail(ErrorCode::IoError, "frame " + std::to_string(ipm_frame) + " not in " + ipm_trace);
    }
    const Homography hom = bev_homography(k, deg2rad(ipm_pitch), deg2rad(ipm_yaw),
                                          deg2rad(ipm_roll), ipm_height, bev);
    io::write_homography(hom, ipm_out);
    if (!ipm_image.empty() && !ipm_warp_out.empty())
      write_pnm(warp_image(read_pnm(ipm_image), hom, ipm_w, ipm_h), ipm_warp_out);
  });

  // --- oracle ----------------------------------------------------------------
  std::string or_intrinsics, or_obs, or_out;
  PipelineConfig or_pipe;
  auto* orc = app.add_subcommand("oracle", "per-frame batch optimization (no filtering)");
  orc->add_option("--intrinsics", or_intrinsics, "intrinsics JSON")->required();
  orc->add_option("--obs", or_obs, "observations JSONL")->required();
  orc->add_option("--out", or_out, "output trace CSV")->required();
  orc->add_option("--lane-width", or_pipe.lane_width_prior, "lane width prior in meters");
  orc->add_option("--seed", or_pipe.ransac.rng_seed, "RANSAC seed");
  orc->callback([&] {
    or_pipe.intrinsics = io::read_intrinsics(or_intrinsics);
    std::vector<io::TraceRow> rows;
    for (const auto& obs : io::read_observations(or_obs)) {
      try {
        const ExtrinsicEstimate e = batch_oracle(obs, or_pipe);
        io::TraceRow row;
        row.frame = obs.frame_index;
        row.pitch_deg = io::quantize(rad2deg(e.theta), 6);
        row.yaw_deg = io::quantize(rad2deg(e.phi), 6);
        row.roll_deg = io::quantize(rad2deg(e.psi), 6);
        row.height_m = io::quantize(e.h, 5);
        rows.push_back(std::move(row));
      } catch (const CalibError& e) {
        std::cerr << "frame " << obs.frame_index << ": " << e.what() << "\n";
      }
    }
    io::write_trace(rows, or_out);
  });

  std::vector<const char*> argv;
  argv.push_back("lanecal");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace lanecal::cli
