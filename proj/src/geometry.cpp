#include "tilelane/geometry.hpp"

#include <stdexcept>
#include <string>

namespace tilelane {

void CameraPose::validate() const {
  if (!(height > 0.0) || !std::isfinite(height)) {
    throw std::invalid_argument("camera height must be positive, got " +
                                std::to_string(height));
  }
  if (!(std::abs(pitch) < 0.5 * kPi)) {
    throw std::invalid_argument("camera pitch must be within (-pi/2, pi/2)");
  }
}

void GridConfig::validate() const {
  if (width_tiles <= 0 || height_tiles <= 0) {
    throw std::invalid_argument("grid tile counts must be positive");
  }
  if (!(tile_width > 0.0) || !(tile_length > 0.0)) {
    throw std::invalid_argument("tile dimensions must be positive");
  }
}

Vec2 tile_center(const GridConfig& grid, int i, int j) {
  if (i < 0 || i >= grid.width_tiles || j < 0 || j >= grid.height_tiles) {
    throw std::out_of_range("tile index (" + std::to_string(i) + ", " +
                            std::to_string(j) + ") outside grid");
  }
  return grid.origin + Vec2((i + 0.5) * grid.tile_width, (j + 0.5) * grid.tile_length);
}

Mat3 pitch_rotation(double pitch) {
  const double c = std::cos(pitch);
  const double s = std::sin(pitch);
  Mat3 r;
  r << 1.0, 0.0, 0.0,
       0.0, c, s,
       0.0, -s, c;
  return r;
}

Vec3 road_to_camera(const Vec3& road, const CameraPose& pose) {
  return pitch_rotation(pose.pitch) * Vec3(road.x(), road.y(), road.z() - pose.height);
}

Vec3 camera_to_road(const Vec3& cam, const CameraPose& pose) {
  Vec3 p = pitch_rotation(pose.pitch).transpose() * cam;
  p.z() += pose.height;
  return p;
}

Vec2 segment_point_bev(double r, double phi, const Vec2& center) {
  return center + r * Vec2(-std::sin(phi), std::cos(phi));
}

Vec3 segment_to_camera(double r, double phi, double dz, const Vec2& center,
                       const CameraPose& pose) {
  const Vec2 p = segment_point_bev(r, phi, center);
  return road_to_camera(Vec3(p.x(), p.y(), dz), pose);
}

Mat3 segment_jacobian(double r, double phi, const CameraPose& pose) {
  const double s = std::sin(phi);
  const double c = std::cos(phi);
  Mat3 bev;
  bev.col(0) = Vec3(-s, c, 0.0);
  bev.col(1) = Vec3(-r * c, -r * s, 0.0);
  bev.col(2) = Vec3(0.0, 0.0, 1.0);
  return pitch_rotation(pose.pitch) * bev;
}

Vec3 segment_direction_camera(double phi, const CameraPose& pose) {
  return pitch_rotation(pose.pitch) * Vec3(std::cos(phi), std::sin(phi), 0.0);
}

Covariance3 propagate_covariance(double var_r, double var_phi, double var_dz,
                                 double r, double phi, double /*dz*/,
                                 const Vec2& /*center*/, const CameraPose& pose) {
  if (var_r < 0.0 || var_phi < 0.0 || var_dz < 0.0) {
    throw std::invalid_argument("polar variances must be nonnegative");
  }
  const Mat3 j = segment_jacobian(r, phi, pose);
  const Vec3 diag(var_r, var_phi, var_dz);
  Covariance3 cov = j * diag.asDiagonal() * j.transpose();
  // Symmetrize away rounding asymmetry.
  return 0.5 * (cov + cov.transpose());
}

namespace {

// Camera-frame axes (x right, y forward, z up) to optical axes
// (x right, y down, z forward).
Mat3 optical_permutation() {
  Mat3 p;
  p << 1.0, 0.0, 0.0,
       0.0, 0.0, -1.0,
       0.0, 1.0, 0.0;
  return p;
}

}  // namespace

Eigen::Vector2d project_pinhole(const Vec3& cam, const Mat3& intrinsics) {
  const Vec3 h = intrinsics * (optical_permutation() * cam);
  return h.head<2>() / h.z();
}

Eigen::Vector2d apply_homography(const Mat3& h, const Eigen::Vector2d& p) {
  const Vec3 q = h * Vec3(p.x(), p.y(), 1.0);
  return q.head<2>() / q.z();
}

Mat3 ipm_homography(const CameraPose& pose, const Mat3& intrinsics) {
  pose.validate();
  if (!(intrinsics(0, 0) > 0.0) || !(intrinsics(1, 1) > 0.0)) {
    throw std::invalid_argument("intrinsics must have positive focal lengths");
  }
  if (std::abs(intrinsics.determinant()) < 1e-12) {
    throw std::invalid_argument("intrinsics matrix is singular");
  }
  // Road plane point (x, y, 0) -> camera frame R * (x, y, -h).
  Mat3 plane;
  plane << 1.0, 0.0, 0.0,
           0.0, 1.0, 0.0,
           0.0, 0.0, -pose.height;
  const Mat3 road_to_image =
      intrinsics * optical_permutation() * pitch_rotation(pose.pitch) * plane;
  return road_to_image.inverse();
}

}  // namespace tilelane
