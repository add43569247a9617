#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <unordered_set>
#include <vector>

#include "lanecal/geometry.hpp"
#include "lanecal/image.hpp"
#include "lanecal/ipm.hpp"

namespace lanecal {

/// Extrinsic parameters of one frame: pitch, yaw, roll (radians) and camera
/// height above the road (meters), optionally with per-parameter sigmas.
struct ExtrinsicEstimate {
  double theta{0.0};
  double phi{0.0};
  double psi{0.0};
  double h{1.5};
  std::optional<Eigen::Vector4d> sd{};
};

/// All segments observed in one frame, with ground truth when synthetic.
struct FrameObservation {
  int frame_index{0};
  std::vector<LineSegment> segments;
  std::optional<ExtrinsicEstimate> gt{};
};

/// Synthetic driving scene: a flat road with parallel, equally spaced lane
/// boundaries observed by a camera whose extrinsics follow slow sinusoids.
struct SceneConfig {
  int n_frames{300};
  int image_width{1920};
  int image_height{1020};
  int n_lanes{5};  // boundaries = n_lanes + 1
  double lane_width_m{3.7};
  double point_spacing_px{30.0};
  int max_pairs_per_boundary{70};
  double min_segment_px{0.0};  // reject point pairs closer than this in the image
  double noise_var_px2{0.0};
  std::uint64_t rng_seed{0};
  CameraIntrinsics intrinsics{1000.0, 1000.0, 960.0, 510.0};

  double pitch0_rad{deg2rad(1.0)};
  double yaw0_rad{deg2rad(0.5)};
  double roll0_rad{deg2rad(0.3)};
  double height0_m{1.5};
  double pitch_amp_rad{deg2rad(0.5)};
  double yaw_amp_rad{deg2rad(0.5)};
  double roll_amp_rad{deg2rad(0.5)};
  double height_amp_m{0.05};
  double motion_period_frames{100.0};

  double min_depth_m{0.5};
  double max_depth_m{150.0};

  double outlier_fraction{0.0};  // fraction of the emitted segments that are outliers
  double outlier_min_angle_deg{4.0};
  double outlier_max_angle_deg{45.0};
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
}

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline void validate_scene(const SceneConfig& c) {
  if (c.n_frames < 1 || c.n_lanes < 2 || !(c.point_spacing_px > 0.0) || c.noise_var_px2 < 0.0 ||
      c.max_pairs_per_boundary < 1 || c.image_width < 2 || c.image_height < 2 ||
      !(c.lane_width_m > 0.0) || !(c.motion_period_frames > 0.0) ||
      !(c.max_depth_m > c.min_depth_m) || c.outlier_fraction < 0.0 || c.outlier_fraction >= 1.0)
    fail(ErrorCode::ConfigError, "invalid scene configuration");
  if (!(c.height0_m - std::abs(c.height_amp_m) > 0.0))
    fail(ErrorCode::ConfigError, "camera dips below the road surface");
}

// world -> camera rotation for the given extrinsics (world: X right, Y down
// toward the road plane at Y=+h, Z along the lanes).
inline Mat3 world_to_camera(const ExtrinsicEstimate& e) {
  return rotation_pitch_yaw(e.theta, e.phi).m * roll_matrix(e.psi).m.transpose();
}

// Visible image-plane span of the boundary at lateral offset x_world, or
// nullopt when it does not cross the image. The projected boundary is a
// straight image line; visibility in depth is a single interval found by
// intersecting the linear constraints depth >= min_depth and pixel in bounds.
inline std::optional<std::pair<Vec2, Vec2>> boundary_span(const SceneConfig& cfg,
                                                          const ExtrinsicEstimate& gt,
                                                          double x_world) {
  const Mat3 r_cw = world_to_camera(gt);
  const Vec3 a0 = r_cw * Vec3(x_world, gt.h, 0.0);
  const Vec3 az = r_cw * Vec3(0.0, 0.0, 1.0);
  if (az.z() < 1e-9) return std::nullopt;
  const Mat3 k = cfg.intrinsics.matrix();
  const Vec3 b0 = k * a0;
  const Vec3 bz = k * az;

  double lo = -std::numeric_limits<double>::infinity();
  double hi = cfg.max_depth_m;
  const auto cut = [&lo, &hi](double a, double b) {
    // constraint a + b*Z >= 0
    if (std::abs(b) < 1e-15) {
      if (a < 0.0) lo = std::numeric_limits<double>::infinity();
    } else if (b > 0.0) {
      lo = std::max(lo, -a / b);
    } else {
      hi = std::min(hi, -a / b);
    }
  };
  const double w1 = cfg.image_width - 1.0;
  const double h1 = cfg.image_height - 1.0;
  cut(a0.z() - cfg.min_depth_m, az.z());
  cut(b0.x(), bz.x());
  cut(w1 * a0.z() - b0.x(), w1 * az.z() - bz.x());
  cut(b0.y(), bz.y());
  cut(h1 * a0.z() - b0.y(), h1 * az.z() - bz.y());
  if (!(lo < hi)) return std::nullopt;
  const double pad = 1e-9 * (hi - lo);
  const auto px = [&](double z) {
    const Vec3 p = b0 + z * bz;
    return Vec2(p.x() / p.z(), p.y() / p.z());
  };
  return std::make_pair(px(lo + pad), px(hi - pad));
}

inline double boundary_offset(const SceneConfig& cfg, int i) {
  const int n_boundaries = cfg.n_lanes + 1;
  return (i - 0.5 * (n_boundaries - 1)) * cfg.lane_width_m;
}

}  // namespace detail

/// Ground-truth extrinsics at a frame: sinusoids around the nominal values.
inline ExtrinsicEstimate scene_extrinsics_at(const SceneConfig& cfg, int frame) {
  const double s = std::sin(2.0 * kPi * frame / cfg.motion_period_frames);
  ExtrinsicEstimate e;
  e.theta = cfg.pitch0_rad + cfg.pitch_amp_rad * s;
  e.phi = cfg.yaw0_rad + cfg.yaw_amp_rad * s;
  e.psi = cfg.roll0_rad + cfg.roll_amp_rad * s;
  e.h = cfg.height0_m + cfg.height_amp_m * s;
  return e;
}

/// Segments of one frame: equally spaced points along each visible projected
/// boundary, randomly paired (at most max_pairs_per_boundary pairs), then
/// endpoint noise, then optional injected outlier segments. Point/pair
/// selection, noise, and outliers draw from separate per-frame streams so
/// that changing the noise variance keeps the underlying segments fixed.
inline FrameObservation generate_frame(const SceneConfig& cfg, int frame) {
  detail::validate_scene(cfg);
  FrameObservation obs;
  obs.frame_index = frame;
  obs.gt = scene_extrinsics_at(cfg, frame);

  std::mt19937_64 rng_geom(detail::mix_seed(cfg.rng_seed, static_cast<std::uint64_t>(frame), 1));
  std::mt19937_64 rng_noise(detail::mix_seed(cfg.rng_seed, static_cast<std::uint64_t>(frame), 2));
  std::mt19937_64 rng_out(detail::mix_seed(cfg.rng_seed, static_cast<std::uint64_t>(frame), 3));
  std::normal_distribution<double> gauss(0.0, std::sqrt(cfg.noise_var_px2));

  const int n_boundaries = cfg.n_lanes + 1;
  for (int b = 0; b < n_boundaries; ++b) {
    const auto span = detail::boundary_span(cfg, *obs.gt, detail::boundary_offset(cfg, b));
    if (!span) continue;
    const Vec2 a = span->first;
    const Vec2 d = span->second - span->first;
    const double len = d.norm();
    const int n_pts = static_cast<int>(std::floor(len / cfg.point_spacing_px)) + 1;
    if (n_pts < 2) continue;
    std::vector<Vec2> pts(static_cast<size_t>(n_pts));
    const Vec2 step = d / len * cfg.point_spacing_px;
    for (int i = 0; i < n_pts; ++i) pts[static_cast<size_t>(i)] = a + i * step;

    const int gap_min =
        std::max(1, static_cast<int>(std::ceil(cfg.min_segment_px / cfg.point_spacing_px - 1e-9)));
    long long all_pairs = 0;
    for (int g = gap_min; g < n_pts; ++g) all_pairs += n_pts - g;

    std::vector<std::pair<int, int>> chosen;
    if (all_pairs <= cfg.max_pairs_per_boundary) {
      for (int i = 0; i < n_pts; ++i)
        for (int j = i + gap_min; j < n_pts; ++j) chosen.emplace_back(i, j);
    } else {
      std::unordered_set<long long> seen;
      long long attempts = 0;
      const long long attempt_cap = 100LL * cfg.max_pairs_per_boundary;
      while (static_cast<int>(chosen.size()) < cfg.max_pairs_per_boundary &&
             attempts++ < attempt_cap) {
        int i = static_cast<int>(rng_geom() % static_cast<std::uint64_t>(n_pts));
        int j = static_cast<int>(rng_geom() % static_cast<std::uint64_t>(n_pts));
        if (i > j) std::swap(i, j);
        if (j - i < gap_min) continue;
        const long long key = static_cast<long long>(i) * n_pts + j;
        if (!seen.insert(key).second) continue;
        chosen.emplace_back(i, j);
      }
    }

    for (const auto& [i, j] : chosen) {
      Vec2 e1 = pts[static_cast<size_t>(i)];
      Vec2 e2 = pts[static_cast<size_t>(j)];
      e1.x() += gauss(rng_noise);
      e1.y() += gauss(rng_noise);
      e2.x() += gauss(rng_noise);
      e2.y() += gauss(rng_noise);
      if ((e2 - e1).norm() <= 1e-9) continue;
      obs.segments.emplace_back(e1, e2, b);
    }
  }

  if (cfg.outlier_fraction > 0.0 && !obs.segments.empty()) {
    const long long n_true = static_cast<long long>(obs.segments.size());
    const long long n_out = std::llround(cfg.outlier_fraction / (1.0 - cfg.outlier_fraction) *
                                         static_cast<double>(n_true));
    const Vec3 v = rotation_pitch_yaw(obs.gt->theta, obs.gt->phi).m * Vec3(0, 0, 1);
    const Vec2 vp = cfg.intrinsics.project(v);
    const double margin = 30.0;
    for (long long i = 0; i < n_out; ++i) {
      for (int attempt = 0; attempt < 64; ++attempt) {
        const Vec2 mid(margin + detail::uniform01(rng_out) * (cfg.image_width - 2 * margin),
                       margin + detail::uniform01(rng_out) * (cfg.image_height - 2 * margin));
        Vec2 ray = mid - vp;
        if (ray.norm() < 1.0) continue;
        ray.normalize();
        const double off = deg2rad(cfg.outlier_min_angle_deg +
                                   detail::uniform01(rng_out) *
                                       (cfg.outlier_max_angle_deg - cfg.outlier_min_angle_deg)) *
                           (detail::uniform01(rng_out) < 0.5 ? -1.0 : 1.0);
        const Vec2 dir(ray.x() * std::cos(off) - ray.y() * std::sin(off),
                       ray.x() * std::sin(off) + ray.y() * std::cos(off));
        double half = 0.5 * (60.0 + detail::uniform01(rng_out) * 340.0);
        // shrink so both endpoints stay inside the image
        for (double sgn : {-1.0, 1.0}) {
          const Vec2 q = mid + sgn * half * dir;
          double t = 1.0;
          if (q.x() < 0.0) t = std::min(t, mid.x() / (mid.x() - q.x()));
          if (q.x() > cfg.image_width - 1.0)
            t = std::min(t, (cfg.image_width - 1.0 - mid.x()) / (q.x() - mid.x()));
          if (q.y() < 0.0) t = std::min(t, mid.y() / (mid.y() - q.y()));
          if (q.y() > cfg.image_height - 1.0)
            t = std::min(t, (cfg.image_height - 1.0 - mid.y()) / (q.y() - mid.y()));
          half *= std::max(0.0, t * 0.99);
        }
        if (half < 20.0) continue;
        obs.segments.emplace_back(mid - half * dir, mid + half * dir, std::nullopt);
        break;
      }
    }
  }
  return obs;
}

inline std::vector<FrameObservation> generate_sequence(const SceneConfig& cfg) {
  detail::validate_scene(cfg);
  std::vector<FrameObservation> seq;
  seq.reserve(static_cast<size_t>(cfg.n_frames));
  for (int t = 0; t < cfg.n_frames; ++t) seq.push_back(generate_frame(cfg, t));
  return seq;
}

/// Grayscale rendering of one frame: lane boundaries as white lines on black.
inline Image render_frame(const SceneConfig& cfg, int frame, double line_width_px = 3.0) {
  detail::validate_scene(cfg);
  const ExtrinsicEstimate gt = scene_extrinsics_at(cfg, frame);
  Image img = Image::zeros(cfg.image_width, cfg.image_height, 1);
  const double halfw = 0.5 * line_width_px;
  const int n_boundaries = cfg.n_lanes + 1;
  for (int b = 0; b < n_boundaries; ++b) {
    const auto span = detail::boundary_span(cfg, gt, detail::boundary_offset(cfg, b));
    if (!span) continue;
    const Vec2 a = span->first;
    const Vec2 e = span->second;
    const Vec2 d = e - a;
    const bool x_major = std::abs(d.x()) >= std::abs(d.y());
    const double lo = x_major ? std::min(a.x(), e.x()) : std::min(a.y(), e.y());
    const double hi = x_major ? std::max(a.x(), e.x()) : std::max(a.y(), e.y());
    for (int t = static_cast<int>(std::ceil(lo)); t <= static_cast<int>(std::floor(hi)); ++t) {
      const double center = x_major ? a.y() + (t - a.x()) * d.y() / d.x()
                                    : a.x() + (t - a.y()) * d.x() / d.y();
      const int c_lo = static_cast<int>(std::floor(center - halfw - 1.0));
      const int c_hi = static_cast<int>(std::ceil(center + halfw + 1.0));
      for (int c = c_lo; c <= c_hi; ++c) {
        const int x = x_major ? t : c;
        const int y = x_major ? c : t;
        if (x < 0 || y < 0 || x >= img.width || y >= img.height) continue;
        const double cov = std::clamp(halfw + 0.5 - std::abs(c - center), 0.0, 1.0);
        const auto value = static_cast<std::uint8_t>(std::lround(255.0 * cov));
        img.at(x, y) = std::max(img.at(x, y), value);
      }
    }
  }
  return img;
}

}  // namespace lanecal
