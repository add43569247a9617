#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "lanecal/ekf.hpp"
#include "lanecal/geometry.hpp"
#include "lanecal/vp.hpp"

namespace lanecal {

/// Pitch/yaw filter state: angles plus per-frame angular velocities.
struct PitchYawState {
  double theta{0.0};
  double phi{0.0};
  double omega_theta{0.0};
  double omega_phi{0.0};

  Eigen::Vector4d to_vector() const { return {theta, phi, omega_theta, omega_phi}; }
  static PitchYawState from_vector(const Eigen::Vector4d& v) { return {v(0), v(1), v(2), v(3)}; }
};

/// Pitch/yaw from a vanishing direction, zero initial velocities.
inline PitchYawState init_from_vd(const UnitVector3& v) {
  const auto [theta, phi] = pitch_yaw_from_vd(v);
  return {theta, phi, 0.0, 0.0};
}

/// Constant angular velocity transition.
inline PitchYawState py_system_step(const PitchYawState& s, double dt) {
  return {s.theta + s.omega_theta * dt, s.phi + s.omega_phi * dt, s.omega_theta, s.omega_phi};
}

inline Eigen::Matrix4d py_system_jacobian(double dt) {
  Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
  f(0, 2) = dt;
  f(1, 3) = dt;
  return f;
}

/// Orthogonality measurement between the predicted vanishing direction and a
/// great-circle normal: h = v(theta, phi) . n, zero when the normal belongs
/// to a line through the true vanishing point.
inline ScalarResidual py_measurement(const PitchYawState& s, const UnitVector3& n) {
  const double ct = std::cos(s.theta), st = std::sin(s.theta);
  const double cp = std::cos(s.phi), sp = std::sin(s.phi);
  // v = R(theta) R(phi) e_z = (sp, -st*cp, ct*cp)
  ScalarResidual r;
  r.value = sp * n.x() - st * cp * n.y() + ct * cp * n.z();
  r.jacobian(0) = -ct * cp * n.y() - st * cp * n.z();
  r.jacobian(1) = cp * n.x() + st * sp * n.y() - ct * sp * n.z();
  return r;
}

struct PitchYawFilterParams {
  double dt{1.0};
  Eigen::Matrix4d process_noise{
      Eigen::Vector4d(0.0, 0.0, std::pow(deg2rad(0.05), 2), std::pow(deg2rad(0.05), 2))
          .asDiagonal()};
  double measurement_variance{std::pow(std::sin(deg2rad(0.2)), 2)};
  double gate_sigma{5.0};  // residuals beyond this many innovation sigmas are dropped
};

/// Default initial covariance for a VP-initialized pitch/yaw state.
inline Eigen::Matrix4d py_default_init_covariance() {
  return Eigen::Vector4d(std::pow(deg2rad(1.0), 2), std::pow(deg2rad(1.0), 2),
                         std::pow(deg2rad(0.1), 2), std::pow(deg2rad(0.1), 2))
      .asDiagonal();
}

inline GaussianState make_py_state(const PitchYawState& s, const Eigen::Matrix4d& p0) {
  return {s.to_vector(), p0};
}

/// Predict and, when inliers are available, update against the stacked
/// orthogonality residuals of their great-circle normals. With no usable
/// inliers the prediction is returned and flagged.
inline FilterStepResult py_step_frame(const GaussianState& s,
                                      const std::vector<LineSegment>& inliers,
                                      const CameraIntrinsics& k,
                                      const PitchYawFilterParams& prm) {
  const auto f = [&prm](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return py_system_step(PitchYawState::from_vector(x), prm.dt).to_vector();
  };
  const auto fj = [&prm](const Eigen::VectorXd&) -> Eigen::MatrixXd {
    return py_system_jacobian(prm.dt);
  };
  FilterStepResult out;
  out.state = predict(s, f, fj, prm.process_noise);
  if (inliers.empty()) return out;

  const PitchYawState pred = PitchYawState::from_vector(out.state.x);
  std::vector<ScalarResidual> rows;
  rows.reserve(inliers.size());
  for (const auto& seg : inliers) {
    UnitVector3 n;
    try {
      n = ngc_of_segment(k, seg);
    } catch (const CalibError&) {
      continue;
    }
    const ScalarResidual r = py_measurement(pred, n);
    const double innov_var =
        (r.jacobian * out.state.p * r.jacobian.transpose())(0) + prm.measurement_variance;
    if (std::abs(r.value) > prm.gate_sigma * std::sqrt(innov_var)) continue;
    rows.push_back(r);
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
  // camera keeps facing forward
  const double lim = kPi / 2.0 - 1e-9;
  out.state.x(0) = std::clamp(out.state.x(0), -lim, lim);
  out.state.x(1) = std::clamp(out.state.x(1), -lim, lim);
  out.measurement_applied = true;
  out.measurements_used = m;
  out.residual_norm = batch.residual.norm();
  return out;
}

}  // namespace lanecal
