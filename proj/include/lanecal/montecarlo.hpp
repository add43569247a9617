#pragma once

#include <future>
#include <string>
#include <thread>
#include <vector>

#include "lanecal/io.hpp"
#include "lanecal/pipeline.hpp"
#include "lanecal/synth.hpp"

namespace lanecal {

struct MonteCarloReport {
  io::RmseReport rmse{};
  std::vector<std::string> failures;  // "run <i>: <reason>" for every failed run
};

namespace detail {

struct RunOutcome {
  io::RmseAccumulator acc{};
  bool ok{true};
  std::string error;
};

inline RunOutcome monte_carlo_run(const SceneConfig& scene, const PipelineConfig& pipe, int run) {
  RunOutcome out;
  try {
    SceneConfig sc = scene;
    sc.rng_seed = mix_seed(scene.rng_seed, static_cast<std::uint64_t>(run), 101);
    PipelineConfig pc = pipe;
    pc.ransac.rng_seed = mix_seed(pipe.ransac.rng_seed, static_cast<std::uint64_t>(run), 211);
    Calibrator calib(pc);
    for (int t = 0; t < sc.n_frames; ++t) {
      const FrameObservation obs = generate_frame(sc, t);
      const FrameResult res = calib.process_frame(obs);
      if (t < pc.burn_in || !obs.gt) continue;
      out.acc.add(io::make_trace_row(res), *obs.gt);
    }
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  return out;
}

}  // namespace detail

/// Run the full pipeline on independently seeded synthetic sequences and
/// aggregate the post-burn-in RMSE of all four extrinsic parameters across
/// every run. Runs execute in parallel but merge in run order, so the report
/// is identical for any thread count. Failed runs are reported, not dropped.
inline MonteCarloReport run_monte_carlo(const SceneConfig& scene, int runs,
                                        const PipelineConfig& pipe, int n_threads = 0) {
  if (runs < 1) fail(ErrorCode::ConfigError, "need at least one run");
  if (n_threads <= 0) n_threads = static_cast<int>(std::thread::hardware_concurrency());
  if (n_threads < 1) n_threads = 1;

  std::vector<detail::RunOutcome> outcomes(static_cast<size_t>(runs));
  if (n_threads == 1) {
    for (int r = 0; r < runs; ++r)
      outcomes[static_cast<size_t>(r)] = detail::monte_carlo_run(scene, pipe, r);
  } else {
    std::vector<std::future<detail::RunOutcome>> futures;
    futures.reserve(static_cast<size_t>(runs));
    // std::async with a bounded window keeps at most n_threads runs in flight
    int launched = 0, collected = 0;
    while (collected < runs) {
      while (launched < runs && launched - collected < n_threads) {
        futures.push_back(std::async(std::launch::async, detail::monte_carlo_run, scene, pipe,
                                     launched));
        ++launched;
      }
      outcomes[static_cast<size_t>(collected)] = futures[static_cast<size_t>(collected)].get();
      ++collected;
    }
  }

  MonteCarloReport report;
  io::RmseAccumulator total;
  int ok_runs = 0;
  for (int r = 0; r < runs; ++r) {
    const auto& o = outcomes[static_cast<size_t>(r)];
    if (o.ok) {
      total.merge(o.acc);
      ++ok_runs;
    } else {
      report.failures.push_back("run " + std::to_string(r) + ": " + o.error);
    }
  }
  if (ok_runs == 0)
    fail(ErrorCode::NonConvergence, "all runs failed; first: " + report.failures.front());
  report.rmse = total.report(ok_runs, pipe.burn_in);
  return report;
}

}  // namespace lanecal
