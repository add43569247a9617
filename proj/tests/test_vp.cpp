#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "lanecal/synth.hpp"
#include "lanecal/vp.hpp"

using namespace lanecal;

namespace {

const CameraIntrinsics kCam{1000, 1000, 960, 510};

double angular_error(const UnitVector3& a, const Vec3& b) {
  const Vec3 bn = b.normalized();
  return std::asin(std::min(1.0, a.v.cross(bn).norm()));
}

// Projects a world point through rotation r (world -> camera), camera at the
// origin.
Vec2 project(const Mat3& r, const Vec3& pw) {
  const Vec3 rc = r * pw;
  return kCam.project(rc);
}

// Segments sampled from 3D lines parallel to e_z at given (x, y) offsets.
std::vector<LineSegment> parallel_line_segments(const Mat3& r,
                                                const std::vector<Vec2>& offsets,
                                                double z1, double z2) {
  std::vector<LineSegment> segs;
  for (size_t i = 0; i < offsets.size(); ++i) {
    const Vec3 a(offsets[i].x(), offsets[i].y(), z1 + 3.0 * static_cast<double>(i));
    const Vec3 b(offsets[i].x(), offsets[i].y(), z2 + 5.0 * static_cast<double>(i));
    segs.emplace_back(project(r, a), project(r, b), static_cast<int>(i));
  }
  return segs;
}

}  // namespace

TEST_CASE("hypothesis from two segments meeting at the principal point") {
  const LineSegment a(Vec2(960 - 200, 510 + 100), Vec2(960 - 50, 510 + 25));
  const LineSegment b(Vec2(960 + 300, 510 + 150), Vec2(960 + 60, 510 + 30));
  const UnitVector3 v = vp_hypothesis(a, b, kCam);
  REQUIRE(angular_error(v, Vec3(0, 0, 1)) < 1e-9);
}

TEST_CASE("hypothesis recovers the rotated common direction") {
  const Mat3 r = rotation_pitch_yaw(deg2rad(2.0), deg2rad(-1.5)).m.transpose();
  const Vec3 world_dir(0, 0, 1);
  const auto segs = parallel_line_segments(
      r, {Vec2(-3.7, 1.5), Vec2(0.0, 1.5), Vec2(3.7, 1.5)}, 8.0, 40.0);
  const UnitVector3 v = vp_hypothesis(segs[0], segs[1], kCam);
  REQUIRE(angular_error(v, r * world_dir) < 1e-9);
  const UnitVector3 v2 = vp_hypothesis(segs[1], segs[2], kCam);
  REQUIRE(angular_error(v2, r * world_dir) < 1e-9);
}

TEST_CASE("hypothesis from identical segments is rejected") {
  const LineSegment a(Vec2(100, 100), Vec2(300, 200));
  REQUIRE_THROWS_AS(vp_hypothesis(a, a, kCam), CalibError);
}

TEST_CASE("line-point angle of incident and perpendicular segments") {
  const UnitVector3 vd = UnitVector3::of(Vec3(0, 0, 1));  // projects to (960, 510)
  // segment collinear with the ray from the VP through its midpoint
  const LineSegment incident(Vec2(960 + 100, 510 + 50), Vec2(960 + 300, 510 + 150));
  REQUIRE(line_point_angle(vd, incident, kCam) < 1e-12);
  // segment perpendicular to that ray
  const LineSegment perp(Vec2(960 + 200 - 25, 510 + 100 + 50), Vec2(960 + 200 + 25, 510 + 100 - 50));
  REQUIRE(line_point_angle(vd, perp, kCam) == Catch::Approx(kPi / 2).margin(1e-12));
}

TEST_CASE("line-point angle matches the 2D construction oracle") {
  const CameraIntrinsics ident{1, 1, 0, 0};
  const UnitVector3 vd = UnitVector3::of(Vec3(0, 0, 1));
  const LineSegment seg(Vec2(1, 1), Vec2(2, 1.05));
  // oracle: VP at the origin, angle between (1.5, 1.025) and (1, 0.05); frozen
  REQUIRE(line_point_angle(vd, seg, ident) ==
          Catch::Approx(0.54949408911979492).margin(1e-12));
}

TEST_CASE("line-point angle undefined when the midpoint is the VP") {
  const CameraIntrinsics ident{1, 1, 0, 0};
  const UnitVector3 vd = UnitVector3::of(Vec3(0, 0, 1));
  REQUIRE_THROWS_AS(line_point_angle(vd, LineSegment(Vec2(-1, 0), Vec2(1, 0)), ident), CalibError);
}

TEST_CASE("score of a single incident segment of maximal length is one") {
  RansacConfig cfg;
  const UnitVector3 vd = UnitVector3::of(Vec3(0, 0, 1));
  const std::vector<LineSegment> segs{LineSegment(Vec2(1060, 560), Vec2(1260, 660))};
  REQUIRE(rother_score(vd, segs, kCam, cfg) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("segments at or past the angular threshold contribute nothing") {
  RansacConfig cfg;
  const CameraIntrinsics ident{1, 1, 0, 0};
  const UnitVector3 vd = UnitVector3::of(Vec3(0, 0, 1));
  // midpoint on the +x axis, direction rotated off the VP ray by the threshold
  const auto seg_at = [&](double angle, double len, double mx) {
    const Vec2 d(std::cos(angle), std::sin(angle));
    const Vec2 mid(mx, 0.0);
    return LineSegment(mid - 0.5 * len * d, mid + 0.5 * len * d);
  };
  const double just_over = cfg.theta_th * (1.0 + 1e-9);
  REQUIRE(rother_score(vd, {seg_at(just_over, 2.0, 5.0)}, ident, cfg) == 0.0);

  // one segment at half the threshold and half the maximal length, the other
  // past the threshold: 0.8 * 0.5 + 0.2 * 0.5 = 0.5
  const std::vector<LineSegment> segs{seg_at(cfg.theta_th / 2.0, 1.0, 5.0),
                                      seg_at(just_over, 2.0, 7.0)};
  REQUIRE(rother_score(vd, segs, ident, cfg) == Catch::Approx(0.5).margin(1e-9));

  REQUIRE_THROWS_AS(rother_score(vd, {}, ident, cfg), CalibError);
}

TEST_CASE("score is monotone in incidence angle and segment length") {
  RansacConfig cfg;
  const CameraIntrinsics ident{1, 1, 0, 0};
  const UnitVector3 vd = UnitVector3::of(Vec3(0, 0, 1));
  const auto seg_at = [&](double angle, double len) {
    const Vec2 d(std::cos(angle), std::sin(angle));
    const Vec2 mid(5.0, 0.0);
    return LineSegment(mid - 0.5 * len * d, mid + 0.5 * len * d);
  };
  double prev = 2.0;
  for (double f = 0.0; f <= 1.3; f += 0.1) {
    const double s = rother_score(vd, {seg_at(f * cfg.theta_th, 1.0)}, ident, cfg);
    REQUIRE(s <= prev + 1e-12);
    prev = s;
  }
  // longer incident segment scores at least as much (reference sets l_max)
  const LineSegment reference = seg_at(cfg.theta_th * 1.01, 4.0);
  prev = 0.0;
  for (double len = 0.5; len <= 4.0; len += 0.5) {
    const double s = rother_score(vd, {seg_at(0.0, len), reference}, ident, cfg);
    REQUIRE(s >= prev - 1e-12);
    prev = s;
  }
}

TEST_CASE("smallest-singular-vector solve on exact normals") {
  const auto v = solve_vp_svd({UnitVector3::of(Vec3(1, 0, 0)), UnitVector3::of(Vec3(0, 1, 0))});
  REQUIRE((v.v - Vec3(0, 0, 1)).norm() < 1e-12);
  REQUIRE_THROWS_AS(solve_vp_svd({UnitVector3::of(Vec3(1, 0, 0))}), CalibError);
  REQUIRE_THROWS_AS(solve_vp_svd({UnitVector3::of(Vec3(1, 0, 0)), UnitVector3::of(Vec3(1, 0, 0))}),
                    CalibError);
}

TEST_CASE("svd solve agrees with pairwise intersections on clean segments") {
  const Mat3 r = rotation_pitch_yaw(deg2rad(1.0), deg2rad(0.5)).m.transpose();
  const auto segs = parallel_line_segments(
      r,
      {Vec2(-9.25, 1.5), Vec2(-5.55, 1.5), Vec2(-1.85, 1.5), Vec2(1.85, 1.5), Vec2(5.55, 1.5),
       Vec2(9.25, 1.5)},
      10.0, 50.0);
  std::vector<UnitVector3> ngcs;
  for (const auto& s : segs) ngcs.push_back(ngc_of_segment(kCam, s));
  const UnitVector3 refined = solve_vp_svd(ngcs);
  const UnitVector3 pairwise = vp_hypothesis(segs[0], segs[3], kCam);
  REQUIRE(angular_error(refined, pairwise.v) < 1e-9);
}

TEST_CASE("consensus estimation on clean segments keeps everything") {
  const Mat3 r = rotation_pitch_yaw(deg2rad(1.5), deg2rad(-0.5)).m.transpose();
  const Vec3 truth = r * Vec3(0, 0, 1);
  auto segs = parallel_line_segments(
      r,
      {Vec2(-9.25, 1.5), Vec2(-5.55, 1.5), Vec2(-1.85, 1.5), Vec2(1.85, 1.5), Vec2(5.55, 1.5),
       Vec2(9.25, 1.5)},
      10.0, 50.0);
  RansacConfig cfg;
  cfg.rng_seed = 5;
  const VpResult res = ransac_vp(segs, kCam, cfg);
  REQUIRE(res.inliers.size() == segs.size());
  REQUIRE(angular_error(res.vd, truth) < 1e-8);

  // two segments aimed at a far-away spurious point are excluded
  segs.emplace_back(Vec2(100, 900), Vec2(400, 905), std::nullopt);
  segs.emplace_back(Vec2(500, 950), Vec2(900, 957), std::nullopt);
  const VpResult res2 = ransac_vp(segs, kCam, cfg);
  REQUIRE(res2.inliers.size() == segs.size() - 2);
  for (const auto& inl : res2.inliers) REQUIRE(inl.boundary_id.has_value());
  REQUIRE(angular_error(res2.vd, truth) < 1e-6);

  REQUIRE_THROWS_AS(ransac_vp({segs[0]}, kCam, cfg), CalibError);
}

TEST_CASE("consensus estimation is deterministic for a fixed seed") {
  SceneConfig sc;
  sc.noise_var_px2 = 1.0;
  sc.rng_seed = 99;
  const FrameObservation obs = generate_frame(sc, 3);
  RansacConfig cfg;
  cfg.rng_seed = 1234;
  const VpResult a = ransac_vp(obs.segments, kCam, cfg);
  const VpResult b = ransac_vp(obs.segments, kCam, cfg);
  REQUIRE(a.score == b.score);
  REQUIRE(a.vd.v == b.vd.v);
  REQUIRE(a.inliers.size() == b.inliers.size());
  for (size_t i = 0; i < a.inliers.size(); ++i) {
    REQUIRE(a.inliers[i].p1 == b.inliers[i].p1);
    REQUIRE(a.inliers[i].p2 == b.inliers[i].p2);
  }
}

TEST_CASE("noiseless synthetic frames: full recall, no outlier leakage") {
  SceneConfig sc;
  sc.noise_var_px2 = 0.0;
  sc.outlier_fraction = 0.2;
  sc.n_frames = 100;
  sc.rng_seed = 4;
  RansacConfig cfg;
  cfg.rng_seed = 8;
  for (int t = 0; t < sc.n_frames; t += 1) {
    const FrameObservation obs = generate_frame(sc, t);
    const VpResult res = ransac_vp(obs.segments, sc.intrinsics, cfg);
    size_t true_count = 0;
    for (const auto& s : obs.segments)
      if (s.boundary_id) ++true_count;
    size_t inlier_true = 0, inlier_outliers = 0;
    for (const auto& s : res.inliers)
      (s.boundary_id ? inlier_true : inlier_outliers) += 1;
    REQUIRE(inlier_true == true_count);
    REQUIRE(inlier_outliers == 0);
  }
}

TEST_CASE("refined direction is optimal among unit perturbations") {
  SceneConfig sc;
  sc.noise_var_px2 = 2.0;
  sc.rng_seed = 21;
  const FrameObservation obs = generate_frame(sc, 0);
  RansacConfig cfg;
  cfg.rng_seed = 3;
  const VpResult res = ransac_vp(obs.segments, sc.intrinsics, cfg);
  Eigen::MatrixXd a(static_cast<int>(res.inliers.size()), 3);
  for (int i = 0; i < a.rows(); ++i)
    a.row(i) = ngc_of_segment(sc.intrinsics, res.inliers[static_cast<size_t>(i)]).v.transpose();
  const double best = (a * res.vd.v).norm();
  std::mt19937 rng(17);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    Vec3 u = res.vd.v + 0.05 * Vec3(g(rng), g(rng), g(rng));
    u.normalize();
    REQUIRE(best <= (a * u).norm() + 1e-12);
  }
}

TEST_CASE("collinear segment sets yield no consensus") {
  // both segments on one line: every sampled hypothesis is degenerate
  const LineSegment a(Vec2(100, 100), Vec2(300, 300));
  const LineSegment b(Vec2(400, 400), Vec2(600, 600));
  RansacConfig cfg;
  cfg.rng_seed = 2;
  REQUIRE_THROWS_MATCHES(
      ransac_vp({a, b}, kCam, cfg), CalibError,
      Catch::Matchers::Predicate<CalibError>(
          [](const CalibError& e) { return e.code() == ErrorCode::NoConsensus; }));
}
