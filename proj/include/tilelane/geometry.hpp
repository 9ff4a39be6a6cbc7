#pragma once

// Coordinate frames used throughout the library.
//
// Road frame: x lateral (right positive), y longitudinal (forward positive),
// z up, origin on the road projection plane directly below the camera.
// Camera frame: the road frame shifted down by the camera height and rotated
// by the mounting pitch (see road_to_camera).

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

namespace tilelane {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Covariance3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Wraps an angle into [-pi, pi).
inline double wrap_angle(double a) {
  double w = std::fmod(a + kPi, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  return w - kPi;
}

struct CameraPose {
  double pitch = 0.0;   // radians
  double height = 1.5;  // meters above the road plane

  void validate() const;
};

struct GridConfig {
  int width_tiles = 16;
  int height_tiles = 26;
  double tile_width = 1.28;
  double tile_length = 3.0;
  // Near-left corner of tile (0, 0) in the road frame. The default centers
  // the lateral span on the ego vehicle.
  Vec2 origin{-0.5 * 16 * 1.28, 0.0};

  void validate() const;
  int tile_count() const { return width_tiles * height_tiles; }
  double coverage_width() const { return width_tiles * tile_width; }
  double coverage_length() const { return height_tiles * tile_length; }
  double x_min() const { return origin.x(); }
  double x_max() const { return origin.x() + coverage_width(); }
  double y_min() const { return origin.y(); }
  double y_max() const { return origin.y() + coverage_length(); }
  // Row-major (j, i) flat index.
  int flat(int i, int j) const { return j * width_tiles + i; }
};

Vec2 tile_center(const GridConfig& grid, int i, int j);

/// Pitch rotation applied to road-frame vectors (x untouched, (y, z) rotated).
Mat3 pitch_rotation(double pitch);

Vec3 road_to_camera(const Vec3& road, const CameraPose& pose);
Vec3 camera_to_road(const Vec3& cam, const CameraPose& pose);

/// Perpendicular foot of the tile center on the segment line, lifted by dz.
Vec2 segment_point_bev(double r, double phi, const Vec2& center);

/// Tile segment parameters to a camera-frame point.
Vec3 segment_to_camera(double r, double phi, double dz, const Vec2& center,
                       const CameraPose& pose);

/// d(segment_to_camera)/d(r, phi, dz), columns in that order.
Mat3 segment_jacobian(double r, double phi, const CameraPose& pose);

/// Unit direction of a segment with angle phi, in the camera frame.
Vec3 segment_direction_camera(double phi, const CameraPose& pose);

Covariance3 propagate_covariance(double var_r, double var_phi, double var_dz,
                                 double r, double phi, double dz,
                                 const Vec2& center, const CameraPose& pose);

/// Homography taking image pixels of road-plane points to road-frame (x, y).
/// The camera looks along the camera-frame y axis; image u grows with x and
/// image v grows with -z.
Mat3 ipm_homography(const CameraPose& pose, const Mat3& intrinsics);

/// Pinhole projection of a camera-frame point (same convention as above).
Eigen::Vector2d project_pinhole(const Vec3& cam, const Mat3& intrinsics);

Eigen::Vector2d apply_homography(const Mat3& h, const Eigen::Vector2d& p);

}  // namespace tilelane
