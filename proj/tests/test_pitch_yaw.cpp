#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "lanecal/pitch_yaw.hpp"
#include "lanecal/synth.hpp"
#include "lanecal/vp.hpp"

using namespace lanecal;

TEST_CASE("initialization from the vanishing direction") {
  const PitchYawState a = init_from_vd(UnitVector3::of(Vec3(0, 0, 1)));
  REQUIRE(a.theta == 0.0);
  REQUIRE(a.phi == 0.0);
  REQUIRE(a.omega_theta == 0.0);
  REQUIRE(a.omega_phi == 0.0);

  const UnitVector3 v =
      UnitVector3::of(rotation_pitch_yaw(deg2rad(2.0), deg2rad(1.0)) * Vec3(0, 0, 1));
  const PitchYawState b = init_from_vd(v);
  REQUIRE(b.theta == Catch::Approx(deg2rad(2.0)).margin(1e-12));
  REQUIRE(b.phi == Catch::Approx(deg2rad(1.0)).margin(1e-12));

  REQUIRE_THROWS_AS(init_from_vd(UnitVector3::of(Vec3(0, -1, 1e-12))), CalibError);
}

TEST_CASE("constant angular velocity step") {
  const PitchYawState still{0.1, 0.2, 0.0, 0.0};
  const PitchYawState s1 = py_system_step(still, 1.0);
  REQUIRE(s1.to_vector() == still.to_vector());

  const PitchYawState moving{0.0, 0.0, 0.01, -0.02};
  const PitchYawState s2 = py_system_step(moving, 1.0);
  REQUIRE(s2.theta == Catch::Approx(0.01).margin(1e-15));
  REQUIRE(s2.phi == Catch::Approx(-0.02).margin(1e-15));
  REQUIRE(s2.omega_theta == 0.01);
  REQUIRE(s2.omega_phi == -0.02);
}

TEST_CASE("system Jacobian matches finite differences") {
  const auto f = [](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return py_system_step(PitchYawState::from_vector(x), 1.0).to_vector();
  };
  std::mt19937 rng(3);
  std::normal_distribution<double> g(0.0, 0.1);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector4d x(g(rng), g(rng), g(rng), g(rng));
    const Eigen::MatrixXd fd = finite_difference_jacobian(f, x);
    REQUIRE((fd - py_system_jacobian(1.0)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("orthogonality measurement at the aligned state") {
  const PitchYawState zero{0, 0, 0, 0};
  REQUIRE(py_measurement(zero, UnitVector3::of(Vec3(1, 0, 0))).value == 0.0);
  REQUIRE(py_measurement(zero, UnitVector3::of(Vec3(0, 0, 1))).value == 1.0);
}

TEST_CASE("measurement Jacobian matches finite differences at random states") {
  std::mt19937 rng(5);
  std::normal_distribution<double> ang(0.0, 0.3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const UnitVector3 n = UnitVector3::of(Vec3(g(rng), g(rng), g(rng)));
    const Eigen::Vector4d x(ang(rng), ang(rng), ang(rng) * 0.01, ang(rng) * 0.01);
    const auto f = [&n](const Eigen::VectorXd& v) -> Eigen::VectorXd {
      return Eigen::VectorXd::Constant(
          1, py_measurement(PitchYawState::from_vector(v), n).value);
    };
    const Eigen::MatrixXd fd = finite_difference_jacobian(f, x);
    const ScalarResidual r = py_measurement(PitchYawState::from_vector(x), n);
    for (int j = 0; j < 4; ++j) {
      const double denom = std::max(1e-3, std::abs(r.jacobian(j)));
      REQUIRE(std::abs(fd(0, j) - r.jacobian(j)) / denom < 1e-6);
    }
  }
}

TEST_CASE("measurement vanishes on noiseless normals at the true state") {
  SceneConfig sc;
  sc.noise_var_px2 = 0.0;
  sc.rng_seed = 12;
  for (int t : {0, 25, 60}) {
    const FrameObservation obs = generate_frame(sc, t);
    const PitchYawState truth{obs.gt->theta, obs.gt->phi, 0.0, 0.0};
    for (const auto& seg : obs.segments) {
      const UnitVector3 n = ngc_of_segment(sc.intrinsics, seg);
      REQUIRE(std::abs(py_measurement(truth, n).value) < 1e-10);
    }
  }
}

TEST_CASE("step with noiseless inliers at the predicted state changes nothing") {
  SceneConfig sc;
  sc.noise_var_px2 = 0.0;
  sc.pitch_amp_rad = 0.0;
  sc.yaw_amp_rad = 0.0;
  sc.roll_amp_rad = 0.0;
  sc.height_amp_m = 0.0;
  const FrameObservation obs = generate_frame(sc, 0);
  GaussianState s = make_py_state(PitchYawState{obs.gt->theta, obs.gt->phi, 0.0, 0.0},
                                  py_default_init_covariance());
  const FilterStepResult out = py_step_frame(s, obs.segments, sc.intrinsics, {});
  REQUIRE(out.measurement_applied);
  REQUIRE(out.residual_norm < 1e-8);
  REQUIRE((out.state.x - s.x).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("step with no inliers is a flagged prediction") {
  GaussianState s = make_py_state(PitchYawState{0.01, 0.02, 0.001, 0.0},
                                  py_default_init_covariance());
  const FilterStepResult out = py_step_frame(s, {}, CameraIntrinsics{1000, 1000, 960, 510}, {});
  REQUIRE_FALSE(out.measurement_applied);
  REQUIRE(out.measurements_used == 0);
  REQUIRE(out.state.x(0) == Catch::Approx(0.011).margin(1e-15));
}

TEST_CASE("filter locks onto a constant pose from noiseless frames") {
  SceneConfig sc;
  sc.noise_var_px2 = 0.0;
  sc.pitch_amp_rad = 0.0;
  sc.yaw_amp_rad = 0.0;
  sc.roll_amp_rad = 0.0;
  sc.height_amp_m = 0.0;
  sc.rng_seed = 3;
  RansacConfig rc;
  // start the filter off the truth; the measurements must pull it in
  GaussianState s = make_py_state(PitchYawState{sc.pitch0_rad + deg2rad(0.5),
                                                sc.yaw0_rad - deg2rad(0.5), 0.0, 0.0},
                                  py_default_init_covariance());
  double prev_err = 1e9;
  double err = 0.0;
  for (int t = 0; t < 300; ++t) {
    rc.rng_seed = static_cast<std::uint64_t>(t) + 1;
    const FrameObservation obs = generate_frame(sc, t);
    const VpResult vp = ransac_vp(obs.segments, sc.intrinsics, rc);
    const FilterStepResult out = py_step_frame(s, vp.inliers, sc.intrinsics, {});
    s = out.state;
    err = std::hypot(s.x(0) - obs.gt->theta, s.x(1) - obs.gt->phi);
    if (t >= 10) REQUIRE(err <= prev_err + 1e-10);
    if (t >= 10) prev_err = err;
  }
  REQUIRE(err < 1e-4);
}

TEST_CASE("filter tracks a constant pose under pixel noise") {
  SceneConfig sc;
  sc.noise_var_px2 = 1.0;
  sc.pitch_amp_rad = 0.0;
  sc.yaw_amp_rad = 0.0;
  sc.roll_amp_rad = 0.0;
  sc.height_amp_m = 0.0;
  sc.rng_seed = 9;
  RansacConfig rc;
  GaussianState s;
  bool init = false;
  for (int t = 0; t < 50; ++t) {
    rc.rng_seed = static_cast<std::uint64_t>(t) + 100;
    const FrameObservation obs = generate_frame(sc, t);
    const VpResult vp = ransac_vp(obs.segments, sc.intrinsics, rc);
    if (!init) {
      s = make_py_state(init_from_vd(vp.vd), py_default_init_covariance());
      init = true;
      continue;
    }
    s = py_step_frame(s, vp.inliers, sc.intrinsics, {}).state;
  }
  const ExtrinsicEstimate gt = scene_extrinsics_at(sc, 49);
  REQUIRE(std::abs(s.x(0) - gt.theta) < deg2rad(0.1));
  REQUIRE(std::abs(s.x(1) - gt.phi) < deg2rad(0.1));
}
