#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "lanecal/ekf.hpp"
#include "lanecal/geometry.hpp"

namespace lanecal {

/// A lane boundary after pitch/yaw rectification, reduced to its angle in the
/// normalized road-facing plane. alpha is measured from the axis pointing up
/// out of the road (the -y axis of the rectified plane), positive toward +x;
/// tan(alpha) then orders boundaries from the left of the road to the right.
struct RectifiedLine {
  double alpha{0.0};
  double lateral_key{0.0};  // tan(alpha)
  std::optional<int> boundary_id{};
};

/// Two rectified boundaries enclosing one lane, left at the larger key.
struct LanePair {
  RectifiedLine left;
  RectifiedLine right;
};

/// Roll/height filter state: values plus per-frame rates.
struct RollHeightState {
  double psi{0.0};
  double h{1.5};
  double omega_psi{0.0};
  double v_h{0.0};

  Eigen::Vector4d to_vector() const { return {psi, h, omega_psi, v_h}; }
  static RollHeightState from_vector(const Eigen::Vector4d& v) { return {v(0), v(1), v(2), v(3)}; }
};

/// Back-project both endpoints, undo pitch and yaw, normalize onto the z=1
/// plane, and measure the segment direction against the rectified vertical.
inline RectifiedLine rectify_line(const LineSegment& seg, const CameraIntrinsics& k,
                                  double theta, double phi) {
  const Mat3 r_wc = rotation_pitch_yaw(theta, phi).m.transpose();
  const Vec3 r1 = r_wc * k.back_project(seg.p1);
  const Vec3 r2 = r_wc * k.back_project(seg.p2);
  if (r1.z() <= 1e-9 || r2.z() <= 1e-9)
    fail(ErrorCode::HorizonLine, "rectified endpoint at or behind the horizon");
  const Vec2 q1(r1.x() / r1.z(), r1.y() / r1.z());
  const Vec2 q2(r2.x() / r2.z(), r2.y() / r2.z());
  Vec2 d = q2 - q1;
  if (std::abs(d.y()) < 1e-12 * d.norm())
    fail(ErrorCode::HorizonLine, "rectified line parallel to the horizon");
  if (d.y() > 0.0) d = -d;  // orient away from the road
  RectifiedLine out;
  out.alpha = std::atan2(d.x(), -d.y());
  out.lateral_key = std::tan(out.alpha);
  out.boundary_id = seg.boundary_id;
  return out;
}

/// Lane width implied by a boundary pair at roll psi and height h.
inline double lane_width(double psi, double h, double alpha_l, double alpha_r) {
  if (!(h > 0.0)) fail(ErrorCode::ConfigError, "camera height must be positive");
  const double al = alpha_l - psi;
  const double ar = alpha_r - psi;
  if (kPi / 2.0 - std::abs(al) < 1e-6 || kPi / 2.0 - std::abs(ar) < 1e-6)
    fail(ErrorCode::TangentSingularity, "shifted line angle too close to +-pi/2");
  return h * (std::tan(al) - std::tan(ar));
}

/// Group rectified lines into per-boundary representatives (averaging alpha
/// within a labeled boundary), sort left to right, and pair adjacent
/// boundaries whose implied width is plausible for one lane.
inline std::vector<LanePair> pair_lanes(const std::vector<RectifiedLine>& lines, double psi,
                                        double h, double w_p, double gate_lo = 0.5,
                                        double gate_hi = 2.0) {
  std::map<int, std::pair<double, int>> labeled;  // id -> (alpha sum, count)
  std::vector<RectifiedLine> boundaries;
  for (const auto& l : lines) {
    if (l.boundary_id) {
      auto& acc = labeled[*l.boundary_id];
      acc.first += l.alpha;
      acc.second += 1;
    } else {
      boundaries.push_back(l);
    }
  }
  for (const auto& [id, acc] : labeled) {
    RectifiedLine r;
    r.alpha = acc.first / acc.second;
    r.lateral_key = std::tan(r.alpha);
    r.boundary_id = id;
    boundaries.push_back(r);
  }
  if (boundaries.size() < 3)
    fail(ErrorCode::TooFewBoundaries, "need at least three distinct boundaries");
  std::sort(boundaries.begin(), boundaries.end(),
            [](const RectifiedLine& a, const RectifiedLine& b) {
              return a.lateral_key > b.lateral_key;
            });
  std::vector<LanePair> pairs;
  for (size_t i = 0; i + 1 < boundaries.size(); ++i) {
    double w;
    try {
      w = lane_width(psi, h, boundaries[i].alpha, boundaries[i + 1].alpha);
    } catch (const CalibError&) {
      continue;
    }
    if (w >= gate_lo * w_p && w <= gate_hi * w_p)
      pairs.push_back({boundaries[i], boundaries[i + 1]});
  }
  return pairs;
}

/// Width-prior residual C = w_p - w(psi, h) with its analytic Jacobian over
/// [psi, h, omega_psi, v_h].
inline ScalarResidual width_residual(const LanePair& pair, double psi, double h, double w_p) {
  const double al = pair.left.alpha - psi;
  const double ar = pair.right.alpha - psi;
  ScalarResidual r;
  r.value = w_p - lane_width(psi, h, pair.left.alpha, pair.right.alpha);
  const double sec2_l = 1.0 / std::pow(std::cos(al), 2);
  const double sec2_r = 1.0 / std::pow(std::cos(ar), 2);
  r.jacobian(0) = h * (sec2_l - sec2_r);
  r.jacobian(1) = -(std::tan(al) - std::tan(ar));
  return r;
}

/// Sum of squared width residuals, the energy minimized by the initializer.
inline double width_energy(const std::vector<LanePair>& pairs, double psi, double h, double w_p) {
  double e = 0.0;
  for (const auto& p : pairs) {
    const double c = w_p - lane_width(psi, h, p.left.alpha, p.right.alpha);
    e += c * c;
  }
  return e;
}

struct GridSearchConfig {
  double psi_min{deg2rad(-5.0)};
  double psi_max{deg2rad(5.0)};
  double psi_step{deg2rad(0.25)};
  double h_min{0.5};
  double h_max{3.0};
  double h_step{0.05};
  double gn_tol{1e-10};
  int gn_max_iter{50};
};

/// Exhaustive search over the (psi, h) grid followed by Gauss-Newton
/// refinement of the best cell. Needs at least two pairs: roll is observable
/// only from the disagreement of several width observations.
inline std::pair<double, double> init_grid_gn(const std::vector<LanePair>& pairs, double w_p,
                                              const GridSearchConfig& search = {}) {
  if (pairs.size() < 2) fail(ErrorCode::TooFewPairs, "need at least two lane pairs");

  double best_e = std::numeric_limits<double>::infinity();
  double best_psi = 0.0, best_h = search.h_min;
  for (double psi = search.psi_min; psi <= search.psi_max + 1e-12; psi += search.psi_step) {
    for (double h = search.h_min; h <= search.h_max + 1e-12; h += search.h_step) {
      double e;
      try {
        e = width_energy(pairs, psi, h, w_p);
      } catch (const CalibError&) {
        continue;
      }
      if (e < best_e) {
        best_e = e;
        best_psi = psi;
        best_h = h;
      }
    }
  }
  if (!std::isfinite(best_e))
    fail(ErrorCode::NonConvergence, "no feasible grid cell");

  const double psi_span = search.psi_max - search.psi_min;
  const double h_span = search.h_max - search.h_min;
  double psi = best_psi, h = best_h;
  const int m = static_cast<int>(pairs.size());
  Eigen::MatrixXd jac(m, 2);
  Eigen::VectorXd res(m);
  for (int it = 0; it < search.gn_max_iter; ++it) {
    try {
      for (int i = 0; i < m; ++i) {
        const ScalarResidual r = width_residual(pairs[static_cast<size_t>(i)], psi, h, w_p);
        res(i) = r.value;
        jac(i, 0) = r.jacobian(0);
        jac(i, 1) = r.jacobian(1);
      }
    } catch (const CalibError&) {
      fail(ErrorCode::NonConvergence, "refinement entered a singular configuration");
    }
    const Eigen::Vector2d step =
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(jac).solve(-res);
    psi += step(0);
    h += step(1);
    if (psi < search.psi_min - psi_span || psi > search.psi_max + psi_span ||
        h < search.h_min - h_span || h > search.h_max + h_span || !(h > 0.0) ||
        !std::isfinite(psi) || !std::isfinite(h))
      fail(ErrorCode::NonConvergence, "refinement left the search range");
    if (step.norm() < search.gn_tol) break;
  }
  return {psi, h};
}

struct RollHeightFilterParams {
  double dt{1.0};
  Eigen::Matrix4d process_noise{
      Eigen::Vector4d(0.0, 0.0, std::pow(deg2rad(0.05), 2), std::pow(0.01, 2)).asDiagonal()};
  double measurement_variance{std::pow(0.05, 2)};  // (5 cm)^2 per width residual
};

inline Eigen::Matrix4d rh_default_init_covariance() {
  return Eigen::Vector4d(std::pow(deg2rad(1.0), 2), std::pow(0.1, 2), std::pow(deg2rad(0.1), 2),
                         std::pow(0.01, 2))
      .asDiagonal();
}

inline GaussianState make_rh_state(const RollHeightState& s, const Eigen::Matrix4d& p0) {
  return {s.to_vector(), p0};
}

inline RollHeightState rh_system_step(const RollHeightState& s, double dt) {
  return {s.psi + s.omega_psi * dt, s.h + s.v_h * dt, s.omega_psi, s.v_h};
}

inline Eigen::Matrix4d rh_system_jacobian(double dt) {
  Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
  f(0, 2) = dt;
  f(1, 3) = dt;
  return f;
}

/// Predict and update against the stacked lane-width residuals. Pairs that
/// hit a tangent singularity are dropped; with none left the prediction is
/// returned and flagged.
inline FilterStepResult rh_step_frame(const GaussianState& s, const std::vector<LanePair>& pairs,
                                      double w_p, const RollHeightFilterParams& prm) {
  const auto f = [&prm](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return rh_system_step(RollHeightState::from_vector(x), prm.dt).to_vector();
  };
  const auto fj = [&prm](const Eigen::VectorXd&) -> Eigen::MatrixXd {
    return rh_system_jacobian(prm.dt);
  };
  FilterStepResult out;
  out.state = predict(s, f, fj, prm.process_noise);
  if (pairs.empty()) return out;

  std::vector<ScalarResidual> rows;
  rows.reserve(pairs.size());
  for (const auto& p : pairs) {
    try {
      rows.push_back(width_residual(p, out.state.x(0), out.state.x(1), w_p));
    } catch (const CalibError&) {
    }
  }
  if (rows.empty()) return out;

  MeasurementBatch batch;
  const int m = static_cast<int>(rows.size());
  batch.residual.resize(m);
  batch.jacobian.resize(m, 4);
  batch.noise_diag = Eigen::VectorXd::Constant(m, prm.measurement_variance);
  for (int i = 0; i < m; ++i) {
    batch.residual(i) = -rows[static_cast<size_t>(i)].value;
    batch.jacobian.row(i) = rows[static_cast<size_t>(i)].jacobian;
  }
  out.state = update(out.state, batch);
  out.state.x(0) = std::clamp(out.state.x(0), -kPi / 4.0 + 1e-9, kPi / 4.0 - 1e-9);
  out.state.x(1) = std::max(out.state.x(1), 1e-3);  // height stays positive
  out.measurement_applied = true;
  out.measurements_used = m;
  out.residual_norm = batch.residual.norm();
  return out;
}

}  // namespace lanecal
