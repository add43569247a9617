#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "lanecal/geometry.hpp"

namespace lanecal {

struct RansacConfig {
  int n_loop{200};
  double theta_th{deg2rad(0.7)};
  double lambda1{0.8};
  double lambda2{0.2};
  std::uint64_t rng_seed{0};
};

struct VpResult {
  UnitVector3 vd;                    // refined vanishing direction
  std::vector<LineSegment> inliers;  // consensus set, in input order
  double score{0.0};                 // best consensus score
};

namespace detail {

// Per-segment quantities reused across hypothesis evaluations.
struct SegmentGeom {
  Vec2 mid;
  Vec2 dir;  // unit
  double len;
};

inline SegmentGeom segment_geom(const LineSegment& s) {
  return {s.midpoint(), s.direction(), s.length()};
}

// Angle in [0, pi/2] between a segment and the line joining the projected
// vanishing point with the segment midpoint. vph is the homogeneous image
// point K*v, so a vanishing point at infinity (vph.z == 0) still works.
inline double incidence_angle(const Vec3& vph, const SegmentGeom& g) {
  const Vec2 d(vph.x() - g.mid.x() * vph.z(), vph.y() - g.mid.y() * vph.z());
  const double dn = d.norm();
  if (dn < 1e-9 * std::abs(vph.z()))
    fail(ErrorCode::UndefinedAngle, "segment midpoint coincides with projected VP");
  const double cross = std::abs(g.dir.x() * d.y() - g.dir.y() * d.x());
  const double dot = std::abs(g.dir.dot(d));
  return std::atan2(cross, dot);
}

inline Vec3 homogeneous_vp(const CameraIntrinsics& k, const UnitVector3& vd) {
  return k.matrix() * vd.v;
}

}  // namespace detail

/// Direction where the great circles of two segments intersect.
inline UnitVector3 vp_hypothesis(const LineSegment& lj, const LineSegment& lk,
                                 const CameraIntrinsics& k) {
  const UnitVector3 nj = ngc_of_segment(k, lj);
  const UnitVector3 nk = ngc_of_segment(k, lk);
  const Vec3 v = nj.v.cross(nk.v);
  if (v.norm() < 1e-12)
    fail(ErrorCode::CollinearPair, "segments lie on the same great circle");
  return UnitVector3::of(v).canonical();
}

/// Angle between a segment and the imaginary line from the projected VP to
/// the segment midpoint, in [0, pi/2].
inline double line_point_angle(const UnitVector3& vd, const LineSegment& seg,
                               const CameraIntrinsics& k) {
  return detail::incidence_angle(detail::homogeneous_vp(k, vd), detail::segment_geom(seg));
}

/// Consensus score of a VP candidate. Segments at or past the angular
/// threshold contribute nothing; a segment whose midpoint coincides with the
/// projected VP is treated as exactly incident.
inline double rother_score(const UnitVector3& vd, const std::vector<LineSegment>& segments,
                           const CameraIntrinsics& k, const RansacConfig& cfg) {
  if (segments.empty()) fail(ErrorCode::EmptyInput, "no segments to score");
  double l_max = 0.0;
  for (const auto& s : segments) l_max = std::max(l_max, s.length());
  const Vec3 vph = detail::homogeneous_vp(k, vd);
  double score = 0.0;
  for (const auto& s : segments) {
    const auto g = detail::segment_geom(s);
    double theta;
    try {
      theta = detail::incidence_angle(vph, g);
    } catch (const CalibError&) {
      theta = 0.0;
    }
    if (theta < cfg.theta_th)
      score += cfg.lambda1 * (1.0 - theta / cfg.theta_th) + cfg.lambda2 * (g.len / l_max);
  }
  return score;
}

/// Least-squares vanishing direction from stacked great-circle normals:
/// the right-singular vector of [... n ...]^T with the smallest singular value.
inline UnitVector3 solve_vp_svd(const std::vector<UnitVector3>& ngcs) {
  if (ngcs.size() < 2) fail(ErrorCode::RankDeficient, "need at least two normals");
  Eigen::MatrixXd a(static_cast<int>(ngcs.size()), 3);
  for (int i = 0; i < a.rows(); ++i) a.row(i) = ngcs[static_cast<size_t>(i)].v.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(1) < 1e-9 && sv(2) < 1e-9)
    fail(ErrorCode::RankDeficient, "normals span less than a 2D subspace");
  return UnitVector3::of(svd.matrixV().col(2)).canonical();
}

/// Consensus vanishing-direction estimation: repeatedly hypothesize from two
/// random segments, score against all segments, keep the best inlier set, and
/// refine by SVD on the inlier normals. Deterministic for a fixed seed.
inline VpResult ransac_vp(const std::vector<LineSegment>& segments, const CameraIntrinsics& k,
                          const RansacConfig& cfg) {
  const int n = static_cast<int>(segments.size());
  if (n < 2) fail(ErrorCode::TooFewSegments, "need at least two segments");
  if (cfg.n_loop < 1 || !(cfg.theta_th > 0.0) || !(cfg.lambda1 + cfg.lambda2 > 0.0))
    fail(ErrorCode::ConfigError, "invalid RANSAC configuration");

  std::vector<UnitVector3> ngcs;
  std::vector<detail::SegmentGeom> geoms;
  ngcs.reserve(segments.size());
  geoms.reserve(segments.size());
  double l_max = 0.0;
  for (const auto& s : segments) {
    ngcs.push_back(ngc_of_segment(k, s));
    geoms.push_back(detail::segment_geom(s));
    l_max = std::max(l_max, geoms.back().len);
  }

  std::mt19937_64 rng(cfg.rng_seed);
  const auto draw = [&rng](int bound) { return static_cast<int>(rng() % static_cast<std::uint64_t>(bound)); };

  double s_max = 0.0;
  std::vector<int> best_inliers;
  UnitVector3 best_v;
  bool have_best = false;
  std::vector<double> thetas(segments.size());

  for (int it = 0; it < cfg.n_loop; ++it) {
    const int j = draw(n);
    int k2 = draw(n - 1);
    if (k2 >= j) ++k2;
    const Vec3 cross = ngcs[static_cast<size_t>(j)].v.cross(ngcs[static_cast<size_t>(k2)].v);
    if (cross.norm() < 1e-12) continue;  // collinear sample
    const UnitVector3 vi = UnitVector3::of(cross).canonical();
    const Vec3 vph = detail::homogeneous_vp(k, vi);

    double si = 0.0;
    for (size_t m = 0; m < geoms.size(); ++m) {
      double theta;
      try {
        theta = detail::incidence_angle(vph, geoms[m]);
      } catch (const CalibError&) {
        theta = 0.0;
      }
      thetas[m] = theta;
      if (theta < cfg.theta_th)
        si += cfg.lambda1 * (1.0 - theta / cfg.theta_th) + cfg.lambda2 * (geoms[m].len / l_max);
    }
    if (si > s_max) {
      s_max = si;
      best_v = vi;
      have_best = true;
      best_inliers.clear();
      for (size_t m = 0; m < thetas.size(); ++m)
        if (thetas[m] < cfg.theta_th) best_inliers.push_back(static_cast<int>(m));
    }
  }

  if (!have_best || best_inliers.size() < 2)
    fail(ErrorCode::NoConsensus, "best inlier set has fewer than two members");

  std::vector<UnitVector3> inlier_ngcs;
  VpResult out;
  inlier_ngcs.reserve(best_inliers.size());
  out.inliers.reserve(best_inliers.size());
  for (int idx : best_inliers) {
    inlier_ngcs.push_back(ngcs[static_cast<size_t>(idx)]);
    out.inliers.push_back(segments[static_cast<size_t>(idx)]);
  }
  out.vd = solve_vp_svd(inlier_ngcs);
  out.score = s_max;
  return out;
}

}  // namespace lanecal
