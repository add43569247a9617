#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "lanecal/geometry.hpp"
#include "lanecal/image.hpp"

namespace lanecal {

/// Bird-eye-view raster parameters: a_* are pixels per meter, b_* the covered
/// extent in meters along the lateral (X) and forward (Z) road axes.
struct BevConfig {
  double a_x{20.0};
  double a_z{10.0};
  double b_x{30.0};
  double b_z{60.0};
};

/// Homogeneous map from image pixels to BEV pixels.
struct Homography {
  Mat3 m{Mat3::Identity()};

  Mat3 inverse() const {
    if (std::abs(m.determinant()) <= 1e-12)
      fail(ErrorCode::NonInvertibleHomography, "homography is singular");
    return m.inverse();
  }

  Vec2 apply(const Vec2& p) const {
    const Vec3 q = m * Vec3(p.x(), p.y(), 1.0);
    return {q.x() / q.z(), q.y() / q.z()};
  }
};

/// Camera-to-road rotation: in-plane roll times the transposed pitch/yaw
/// rotation.
inline Rotation3 full_rotation(double theta, double phi, double psi) {
  return Rotation3{roll_matrix(psi).m * rotation_pitch_yaw(theta, phi).m.transpose()};
}

/// Ground homography: BEV raster grid * stacked rotation rows (lateral,
/// forward, vertical/h) * K^-1. Maps a pixel of a ground point at road
/// coordinates (X, Z) to (a_x (X + b_x/2), -a_z (Z - b_z)).
inline Homography bev_homography(const CameraIntrinsics& k, double theta, double phi, double psi,
                                 double h, const BevConfig& cfg) {
  if (!(h > 0.0)) fail(ErrorCode::ConfigError, "camera height must be positive");
  if (!(cfg.a_x > 0.0) || !(cfg.a_z > 0.0) || cfg.b_x < 0.0 || cfg.b_z < 0.0)
    fail(ErrorCode::ConfigError, "BEV scales must be positive and extents non-negative");
  const Mat3 r = full_rotation(theta, phi, psi).m;
  Mat3 grid;
  grid << cfg.a_x, 0.0, cfg.b_x * cfg.a_x / 2.0, 0.0, -cfg.a_z, cfg.b_z * cfg.a_z, 0.0, 0.0, 1.0;
  Mat3 stacked;
  stacked.row(0) = r.row(0);
  stacked.row(1) = r.row(2);
  stacked.row(2) = r.row(1) / h;
  Homography hom{grid * stacked * k.inverse()};
  if (std::abs(hom.m.determinant()) <= 1e-12)
    fail(ErrorCode::NonInvertibleHomography, "degenerate BEV homography");
  return hom;
}

/// Inverse-map each output pixel through hom^-1 and sample the source
/// bilinearly; pixels falling outside the source are black.
inline Image warp_image(const Image& src, const Homography& hom, int out_width, int out_height) {
  if (src.empty()) fail(ErrorCode::EmptyInput, "source image is empty");
  const Mat3 inv = hom.inverse();
  Image out = Image::zeros(out_width, out_height, src.channels);
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      const Vec3 q = inv * Vec3(x, y, 1.0);
      if (std::abs(q.z()) < 1e-12) continue;
      const double sx = q.x() / q.z();
      const double sy = q.y() / q.z();
      if (sx < 0.0 || sy < 0.0 || sx > src.width - 1.0 || sy > src.height - 1.0) continue;
      const int x0 = static_cast<int>(sx);
      const int y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const int y1 = std::min(y0 + 1, src.height - 1);
      const double fx = sx - x0;
      const double fy = sy - y0;
      for (int c = 0; c < src.channels; ++c) {
        const double v = (1.0 - fy) * ((1.0 - fx) * src.at(x0, y0, c) + fx * src.at(x1, y0, c)) +
                         fy * ((1.0 - fx) * src.at(x0, y1, c) + fx * src.at(x1, y1, c));
        out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  return out;
}

}  // namespace lanecal
