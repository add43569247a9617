#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "lanecal/ekf.hpp"
#include "lanecal/geometry.hpp"
#include "lanecal/ipm.hpp"
#include "lanecal/pitch_yaw.hpp"
#include "lanecal/roll_height.hpp"
#include "lanecal/synth.hpp"
#include "lanecal/vp.hpp"

namespace lanecal {

struct PipelineConfig {
  CameraIntrinsics intrinsics{1000.0, 1000.0, 960.0, 510.0};
  double lane_width_prior{3.7};
  RansacConfig ransac{};
  PitchYawFilterParams py{};
  RollHeightFilterParams rh{};
  Eigen::Matrix4d py_init_covariance{py_default_init_covariance()};
  Eigen::Matrix4d rh_init_covariance{rh_default_init_covariance()};
  GridSearchConfig grid{};
  double pair_gate_lo{0.5};
  double pair_gate_hi{2.0};
  BevConfig bev{};
  int burn_in{20};
  // rectify with the pitch/yaw posterior of the same frame; false uses the prediction
  bool rectify_with_posterior{true};
};

/// Per-frame output of the two-stage estimator.
struct FrameResult {
  int frame_index{0};
  ExtrinsicEstimate estimate;
  Homography bev;
  int vp_inliers{0};
  double py_residual_norm{0.0};
  double rh_residual_norm{0.0};
  bool py_init{false};
  bool rh_init{false};
  bool py_prediction_only{false};
  bool rh_prediction_only{false};

  std::string flags() const {
    std::string s;
    const auto add = [&s](const char* tok) {
      if (!s.empty()) s += '|';
      s += tok;
    };
    if (py_init) add("py_init");
    if (rh_init) add("rh_init");
    if (py_prediction_only) add("py_pred");
    if (rh_prediction_only) add("rh_pred");
    return s.empty() ? "-" : s;
  }
};

/// Sequential two-stage calibrator. Each frame runs consensus VP estimation,
/// the pitch/yaw filter, rectification and lane pairing, the roll/height
/// filter, and finally the BEV homography. Per-frame failures degrade to
/// flagged prediction-only results; a sequence is never aborted.
class Calibrator {
 public:
  explicit Calibrator(PipelineConfig cfg) : cfg_(std::move(cfg)) {}

  FrameResult process_frame(const FrameObservation& obs) {
    FrameResult res;
    res.frame_index = obs.frame_index;

    std::optional<VpResult> vp;
    if (obs.segments.size() >= 2) {
      RansacConfig rc = cfg_.ransac;
      rc.rng_seed =
          detail::mix_seed(cfg_.ransac.rng_seed, static_cast<std::uint64_t>(obs.frame_index), 17);
      try {
        vp = ransac_vp(obs.segments, cfg_.intrinsics, rc);
      } catch (const CalibError&) {
      }
    }
    res.vp_inliers = vp ? static_cast<int>(vp->inliers.size()) : 0;

    double theta_rectify = 0.0, phi_rectify = 0.0;
    bool have_angles = false;
    if (py_) {
      if (!cfg_.rectify_with_posterior) {
        const Eigen::Vector4d pred = py_system_jacobian(cfg_.py.dt) * py_->x;
        theta_rectify = pred(0);
        phi_rectify = pred(1);
        have_angles = true;
      }
      auto step = py_step_frame(*py_, vp ? vp->inliers : std::vector<LineSegment>{},
                                cfg_.intrinsics, cfg_.py);
      py_ = step.state;
      res.py_prediction_only = !step.measurement_applied;
      res.py_residual_norm = step.residual_norm;
    } else if (vp) {
      try {
        py_ = make_py_state(init_from_vd(vp->vd), cfg_.py_init_covariance);
        res.py_init = true;
      } catch (const CalibError&) {
        res.py_prediction_only = true;
      }
    } else {
      res.py_prediction_only = true;
    }
    if (py_ && (cfg_.rectify_with_posterior || !have_angles)) {
      theta_rectify = py_->x(0);
      phi_rectify = py_->x(1);
      have_angles = true;
    }

    std::vector<LanePair> pairs;
    if (vp && have_angles) {
      std::vector<RectifiedLine> lines;
      lines.reserve(vp->inliers.size());
      for (const auto& seg : vp->inliers) {
        try {
          lines.push_back(rectify_line(seg, cfg_.intrinsics, theta_rectify, phi_rectify));
        } catch (const CalibError&) {
        }
      }
      const double psi_gate = rh_ ? rh_->x(0) : 0.0;
      const double h_gate = rh_ ? rh_->x(1) : 0.5 * (cfg_.grid.h_min + cfg_.grid.h_max);
      try {
        pairs = pair_lanes(lines, psi_gate, h_gate, cfg_.lane_width_prior, cfg_.pair_gate_lo,
                           cfg_.pair_gate_hi);
      } catch (const CalibError&) {
      }
    }

    if (rh_) {
      auto step = rh_step_frame(*rh_, pairs, cfg_.lane_width_prior, cfg_.rh);
      rh_ = step.state;
      res.rh_prediction_only = !step.measurement_applied;
      res.rh_residual_norm = step.residual_norm;
    } else if (pairs.size() >= 2) {
      try {
        const auto [psi0, h0] = init_grid_gn(pairs, cfg_.lane_width_prior, cfg_.grid);
        rh_ = make_rh_state(RollHeightState{psi0, h0, 0.0, 0.0}, cfg_.rh_init_covariance);
        res.rh_init = true;
      } catch (const CalibError&) {
        res.rh_prediction_only = true;
      }
    } else {
      res.rh_prediction_only = true;
    }

    res.estimate = current_estimate();
    res.bev = bev_homography(cfg_.intrinsics, res.estimate.theta, res.estimate.phi,
                             res.estimate.psi, res.estimate.h, cfg_.bev);
    return res;
  }

  ExtrinsicEstimate current_estimate() const {
    ExtrinsicEstimate e;
    if (py_) {
      e.theta = py_->x(0);
      e.phi = py_->x(1);
    }
    if (rh_) {
      e.psi = rh_->x(0);
      e.h = rh_->x(1);
    } else {
      e.h = 0.5 * (cfg_.grid.h_min + cfg_.grid.h_max);
    }
    if (py_ && rh_) {
      Eigen::Vector4d sd;
      sd << std::sqrt(std::max(0.0, py_->p(0, 0))), std::sqrt(std::max(0.0, py_->p(1, 1))),
          std::sqrt(std::max(0.0, rh_->p(0, 0))), std::sqrt(std::max(0.0, rh_->p(1, 1)));
      e.sd = sd;
    }
    return e;
  }

  const std::optional<GaussianState>& pitch_yaw_state() const { return py_; }
  const std::optional<GaussianState>& roll_height_state() const { return rh_; }
  const PipelineConfig& config() const { return cfg_; }

 private:
  PipelineConfig cfg_;
  std::optional<GaussianState> py_{};
  std::optional<GaussianState> rh_{};
};

/// Per-frame batch solution with no temporal filtering: consensus VP, then
/// nonlinear least squares of the orthogonality residuals for pitch/yaw, then
/// grid + Gauss-Newton on the width energy for roll/height. Serves as the
/// pseudo ground truth and as the steady-state reference for the filters.
inline ExtrinsicEstimate batch_oracle(const FrameObservation& obs, const PipelineConfig& cfg) {
  RansacConfig rc = cfg.ransac;
  rc.rng_seed = detail::mix_seed(cfg.ransac.rng_seed, static_cast<std::uint64_t>(obs.frame_index), 29);
  const VpResult vp = ransac_vp(obs.segments, cfg.intrinsics, rc);

  std::vector<UnitVector3> ngcs;
  ngcs.reserve(vp.inliers.size());
  for (const auto& seg : vp.inliers) ngcs.push_back(ngc_of_segment(cfg.intrinsics, seg));

  auto [theta, phi] = pitch_yaw_from_vd(vp.vd);
  // Gauss-Newton polish of sum h^2 over the inlier normals
  for (int it = 0; it < 50; ++it) {
    Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
    Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
    const PitchYawState st{theta, phi, 0.0, 0.0};
    for (const auto& n : ngcs) {
      const ScalarResidual r = py_measurement(st, n);
      const Eigen::Vector2d j(r.jacobian(0), r.jacobian(1));
      jtj += j * j.transpose();
      jtr += j * r.value;
    }
    const Eigen::Vector2d step = jtj.ldlt().solve(-jtr);
    theta += step(0);
    phi += step(1);
    if (std::abs(theta) > kPi / 2.0 || std::abs(phi) > kPi / 2.0)
      fail(ErrorCode::NonConvergence, "pitch/yaw refinement diverged");
    if (step.norm() < 1e-14) break;
  }

  std::vector<RectifiedLine> lines;
  lines.reserve(vp.inliers.size());
  for (const auto& seg : vp.inliers) {
    try {
      lines.push_back(rectify_line(seg, cfg.intrinsics, theta, phi));
    } catch (const CalibError&) {
    }
  }
  const auto pairs = pair_lanes(lines, 0.0, 0.5 * (cfg.grid.h_min + cfg.grid.h_max),
                                cfg.lane_width_prior, cfg.pair_gate_lo, cfg.pair_gate_hi);
  if (pairs.size() < 2) fail(ErrorCode::TooFewBoundaries, "not enough lane pairs for roll/height");
  const auto [psi, h] = init_grid_gn(pairs, cfg.lane_width_prior, cfg.grid);

  ExtrinsicEstimate e;
  e.theta = theta;
  e.phi = phi;
  e.psi = psi;
  e.h = h;
  return e;
}

}  // namespace lanecal
