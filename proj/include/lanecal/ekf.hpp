#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>

#include "lanecal/errors.hpp"

namespace lanecal {

/// Mean and covariance of a filter state.
struct GaussianState {
  Eigen::VectorXd x;
  Eigen::MatrixXd p;
};

/// Stacked scalar measurements: residual vector y, Jacobian H (m x n),
/// and the diagonal of the measurement noise covariance.
struct MeasurementBatch {
  Eigen::VectorXd residual;
  Eigen::MatrixXd jacobian;
  Eigen::VectorXd noise_diag;
};

/// Scalar residual with its 1x4 state Jacobian, the building block of the
/// stacked measurement batches used by both filters.
struct ScalarResidual {
  double value{0.0};
  Eigen::RowVector4d jacobian{Eigen::RowVector4d::Zero()};
};

/// One filter step plus bookkeeping about whether a measurement was applied.
struct FilterStepResult {
  GaussianState state;
  bool measurement_applied{false};
  int measurements_used{0};
  double residual_norm{0.0};
};

/// Time update: x <- f(x), P <- F P F^T + W.
template <class TransitionFn, class JacobianFn>
GaussianState predict(const GaussianState& s, TransitionFn&& f, JacobianFn&& f_jac,
                      const Eigen::MatrixXd& process_noise) {
  const auto n = s.x.size();
  if (s.p.rows() != n || s.p.cols() != n || process_noise.rows() != n || process_noise.cols() != n)
    fail(ErrorCode::DimensionMismatch, "predict: inconsistent dimensions");
  GaussianState out;
  out.x = f(s.x);
  if (out.x.size() != n) fail(ErrorCode::DimensionMismatch, "predict: transition changed dimension");
  const Eigen::MatrixXd jac = f_jac(s.x);
  if (jac.rows() != n || jac.cols() != n)
    fail(ErrorCode::DimensionMismatch, "predict: Jacobian has wrong shape");
  out.p = jac * s.p * jac.transpose() + process_noise;
  out.p = 0.5 * (out.p + out.p.transpose()).eval();
  return out;
}

namespace detail {

inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

// Textbook form: S = H P H^T + Q, G = P H^T S^-1, P+ = (I - G H) P.
inline GaussianState update_direct(const GaussianState& s, const MeasurementBatch& m) {
  const auto n = s.x.size();
  Eigen::MatrixXd innov_cov = m.jacobian * s.p * m.jacobian.transpose();
  innov_cov.diagonal() += m.noise_diag;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(innov_cov);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-12)
    fail(ErrorCode::SingularInnovation, "innovation covariance not invertible");
  const Eigen::MatrixXd gain = ldlt.solve(m.jacobian * s.p).transpose();
  GaussianState out;
  out.x = s.x + gain * m.residual;
  out.p = symmetrized((Eigen::MatrixXd::Identity(n, n) - gain * m.jacobian) * s.p);
  return out;
}

// Information form, algebraically identical when P and Q are invertible:
// P+ = (P^-1 + H^T Q^-1 H)^-1, x+ = x + P+ H^T Q^-1 y.
// Avoids the m x m innovation factorization for large measurement stacks.
inline GaussianState update_information(const GaussianState& s, const MeasurementBatch& m) {
  const auto n = s.x.size();
  const Eigen::VectorXd inv_q = m.noise_diag.cwiseInverse();
  const Eigen::MatrixXd hq = m.jacobian.transpose() * inv_q.asDiagonal();
  Eigen::LDLT<Eigen::MatrixXd> p_ldlt(s.p);
  const Eigen::MatrixXd info = p_ldlt.solve(Eigen::MatrixXd::Identity(n, n)) + hq * m.jacobian;
  Eigen::LDLT<Eigen::MatrixXd> info_ldlt(symmetrized(info));
  GaussianState out;
  out.p = symmetrized(info_ldlt.solve(Eigen::MatrixXd::Identity(n, n)));
  out.x = s.x + out.p * (hq * m.residual);
  return out;
}

// The information path needs invertible P and Q, and an innovation matrix
// whose conditioning is safely away from the 1e-12 singularity tolerance.
inline bool information_path_ok(const GaussianState& s, const MeasurementBatch& m) {
  const double q_min = m.noise_diag.minCoeff();
  if (!(q_min > 0.0)) return false;
  const double q_max = m.noise_diag.maxCoeff();
  const double s_max_bound = m.jacobian.squaredNorm() * s.p.cwiseAbs().maxCoeff() + q_max;
  if (q_min < 1e-10 * s_max_bound) return false;
  Eigen::LDLT<Eigen::MatrixXd> p_ldlt(s.p);
  return p_ldlt.info() == Eigen::Success && p_ldlt.rcond() > 1e-12;
}

}  // namespace detail

/// Measurement update with stacked scalar measurements. Large batches go
/// through the information form; both routes return a re-symmetrized
/// covariance.
inline GaussianState update(const GaussianState& s, const MeasurementBatch& m) {
  const auto n = s.x.size();
  const auto rows = m.residual.size();
  if (s.p.rows() != n || s.p.cols() != n || m.jacobian.rows() != rows ||
      m.jacobian.cols() != n || m.noise_diag.size() != rows || rows < 1)
    fail(ErrorCode::DimensionMismatch, "update: inconsistent dimensions");
  constexpr Eigen::Index kDirectLimit = 64;
  if (rows > kDirectLimit && detail::information_path_ok(s, m))
    return detail::update_information(s, m);
  return detail::update_direct(s, m);
}

/// Central finite-difference Jacobian, step 1e-6 relative to |x_j|.
template <class Fn>
Eigen::MatrixXd finite_difference_jacobian(Fn&& f, const Eigen::VectorXd& x,
                                           double rel_step = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd jac(f0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = rel_step * std::max(1.0, std::abs(x(j)));
    Eigen::VectorXd xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    jac.col(j) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return jac;
}

}  // namespace lanecal
