#include <doctest.h>

#include "tilelane/geometry.hpp"
#include "tilelane/scenegen.hpp"

#include <cmath>
#include <stdexcept>

using namespace tilelane;

namespace {

Mat3 test_intrinsics() {
  Mat3 k;
  k << 1000.0, 0.0, 640.0,
       0.0, 1000.0, 360.0,
       0.0, 0.0, 1.0;
  return k;
}

}  // namespace

TEST_CASE("wrap_angle maps into [-pi, pi)") {
  CHECK(wrap_angle(0.0) == 0.0);
  CHECK(wrap_angle(kPi) == doctest::Approx(-kPi));
  CHECK(wrap_angle(-kPi) == doctest::Approx(-kPi));
  CHECK(wrap_angle(3.0 * kPi / 2.0) == doctest::Approx(-kPi / 2.0));
  Rng rng(3);
  for (int k = 0; k < 1000; ++k) {
    const double a = rng.uniform(-50.0, 50.0);
    const double w = wrap_angle(a);
    CHECK(w >= -kPi);
    CHECK(w < kPi);
    CHECK(std::abs(std::remainder(a - w, kTwoPi)) < 1e-9);
  }
}

TEST_CASE("tile centers") {
  GridConfig grid;
  const Vec2 c = tile_center(grid, 0, 0);
  CHECK(c.x() == doctest::Approx(-20.48 / 2 + 0.64));
  CHECK(c.y() == doctest::Approx(1.5));
  for (int i = 0; i + 1 < grid.width_tiles; ++i) {
    CHECK(tile_center(grid, i + 1, 5).x() - tile_center(grid, i, 5).x() == doctest::Approx(grid.tile_width));
  }
  CHECK_THROWS_AS(tile_center(grid, grid.width_tiles, 0), std::out_of_range);
  CHECK_THROWS_AS(tile_center(grid, 0, -1), std::out_of_range);
  CHECK(grid.coverage_width() == doctest::Approx(20.48));
  CHECK(grid.coverage_length() == doctest::Approx(78.0));
}

TEST_CASE("pose and grid validation") {
  CHECK_THROWS_AS((CameraPose{0.0, 0.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((CameraPose{2.0, 1.5}.validate()), std::invalid_argument);
  CHECK_NOTHROW((CameraPose{0.1, 1.5}.validate()));
  GridConfig g;
  g.tile_width = 0.0;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
}

TEST_CASE("segment_to_camera examples") {
  const Vec3 a = segment_to_camera(0.0, 0.0, 0.0, Vec2(0, 0), CameraPose{0.0, 1e-9});
  CHECK(a.norm() < 1e-8);
  const Vec3 b = segment_to_camera(0.0, 0.0, 0.0, Vec2(0, 10), CameraPose{0.0, 1.5});
  CHECK(b.x() == doctest::Approx(0.0));
  CHECK(b.y() == doctest::Approx(10.0));
  CHECK(b.z() == doctest::Approx(-1.5));

  // Independent composition: foot point, height shift, then (y, z) rotation.
  const double pitch = 0.1, h = 1.5, r = 0.3, phi = kPi / 2, dz = 0.2;
  const double fx = 1.28 - r * std::sin(phi);
  const double fy = 30.0 + r * std::cos(phi);
  const double zz = dz - h;
  const Vec3 expected(fx, std::cos(pitch) * fy + std::sin(pitch) * zz, -std::sin(pitch) * fy + std::cos(pitch) * zz);
  const Vec3 got = segment_to_camera(r, phi, dz, Vec2(1.28, 30.0), CameraPose{pitch, h});
  CHECK((got - expected).norm() < 1e-12);
}

TEST_CASE("identity pitch keeps BEV coordinates") {
  Rng rng(11);
  for (int k = 0; k < 100; ++k) {
    const double r = rng.uniform(-1, 1), phi = rng.uniform(-kPi, kPi), dz = rng.uniform(-1, 1);
    const Vec2 c(rng.uniform(-10, 10), rng.uniform(0, 80));
    const Vec3 p = segment_to_camera(r, phi, dz, c, CameraPose{0.0, 1.0});
    const Vec2 foot = segment_point_bev(r, phi, c);
    CHECK(p.x() == doctest::Approx(foot.x()));
    CHECK(p.y() == doctest::Approx(foot.y()));
    CHECK(p.z() == doctest::Approx(dz - 1.0));
  }
}

TEST_CASE("pitch rotation is orthonormal") {
  for (double pitch : {-1.2, -0.3, 0.0, 0.05, 0.7, 1.5}) {
    const Mat3 r = pitch_rotation(pitch);
    CHECK((r.transpose() * r - Mat3::Identity()).norm() < 1e-12);
  }
}

TEST_CASE("road and camera frames invert each other") {
  Rng rng(5);
  for (int k = 0; k < 100; ++k) {
    const CameraPose pose{rng.uniform(-0.3, 0.3), rng.uniform(1.0, 2.0)};
    const Vec3 p(rng.uniform(-10, 10), rng.uniform(0, 80), rng.uniform(-1, 1));
    CHECK((camera_to_road(road_to_camera(p, pose), pose) - p).norm() < 1e-12);
  }
}

TEST_CASE("segment jacobian matches central differences") {
  Rng rng(17);
  for (int k = 0; k < 100; ++k) {
    const CameraPose pose{rng.uniform(-0.2, 0.2), rng.uniform(1.2, 1.8)};
    const Vec2 c(rng.uniform(-10, 10), rng.uniform(0, 80));
    const double x[3] = {rng.uniform(-0.6, 0.6), rng.uniform(-kPi, kPi), rng.uniform(-1, 1)};
    const Mat3 j = segment_jacobian(x[0], x[1], pose);
    const double h = 1e-6;
    Mat3 fd;
    for (int q = 0; q < 3; ++q) {
      double xp[3] = {x[0], x[1], x[2]}, xm[3] = {x[0], x[1], x[2]};
      xp[q] += h;
      xm[q] -= h;
      fd.col(q) = (segment_to_camera(xp[0], xp[1], xp[2], c, pose) - segment_to_camera(xm[0], xm[1], xm[2], c, pose)) / (2 * h);
    }
    CHECK((fd - j).norm() / j.norm() < 1e-6);
  }
}

TEST_CASE("covariance propagation examples") {
  const Vec2 c(0.0, 10.0);
  CHECK(propagate_covariance(0, 0, 0, 0.2, 0.4, 0.0, c, CameraPose{0.1, 1.5}).norm() == 0.0);

  // phi = 0 is a segment running laterally, so an r shift moves the point
  // longitudinally; the lateral entry is reached at phi = pi/2.
  const Covariance3 lateral = propagate_covariance(0.04, 0, 0, 0.0, kPi / 2, 0.0, c, CameraPose{0.0, 1.5});
  Covariance3 expected = Covariance3::Zero();
  expected(0, 0) = 0.04;
  CHECK((lateral - expected).norm() < 1e-15);
  const Covariance3 along = propagate_covariance(0.04, 0, 0, 0.0, 0.0, 0.0, c, CameraPose{0.0, 1.5});
  CHECK(along(1, 1) == doctest::Approx(0.04));
  CHECK(along(0, 0) == doctest::Approx(0.0));

  CHECK_THROWS_AS(propagate_covariance(-1e-3, 0, 0, 0, 0, 0, c, CameraPose{}), std::invalid_argument);
}

TEST_CASE("propagated covariance is symmetric positive semidefinite") {
  Rng rng(23);
  for (int k = 0; k < 200; ++k) {
    const CameraPose pose{rng.uniform(-0.3, 0.3), rng.uniform(1.0, 2.0)};
    const Covariance3 cov = propagate_covariance(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1),
                                                 rng.uniform(-1, 1), rng.uniform(-kPi, kPi), rng.uniform(-1, 1),
                                                 Vec2(rng.uniform(-10, 10), rng.uniform(0, 80)), pose);
    CHECK((cov - cov.transpose()).norm() == 0.0);
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-9);
  }
}

TEST_CASE("covariance agrees with a sampled estimate") {
  Rng rng(29);
  const CameraPose pose{0.05, 1.5};
  const Vec2 c(1.28, 30.0);
  const double r = 0.3, phi = 1.4, dz = 0.2, vr = 0.01, vp = 0.004, vz = 0.02;
  const int n = 200000;
  Vec3 mean = Vec3::Zero();
  Mat3 second = Mat3::Zero();
  for (int k = 0; k < n; ++k) {
    const Vec3 p = segment_to_camera(r + std::sqrt(vr) * rng.normal(), phi + std::sqrt(vp) * rng.normal(),
                                     dz + std::sqrt(vz) * rng.normal(), c, pose);
    mean += p;
    second += p * p.transpose();
  }
  mean /= n;
  const Mat3 sample = second / n - mean * mean.transpose();
  const Covariance3 cov = propagate_covariance(vr, vp, vz, r, phi, dz, c, pose);
  CHECK((sample - cov).norm() / cov.norm() < 0.05);
}

TEST_CASE("inverse perspective mapping") {
  const CameraPose pose{0.05, 1.5};
  const Mat3 k = test_intrinsics();
  const Mat3 h = ipm_homography(pose, k);
  CHECK((h * h.inverse() - Mat3::Identity()).norm() < 1e-9);

  Rng rng(31);
  for (int n = 0; n < 100; ++n) {
    const Vec3 road(rng.uniform(-10, 10), rng.uniform(5, 80), 0.0);
    const Eigen::Vector2d px = project_pinhole(road_to_camera(road, pose), k);
    const Eigen::Vector2d back = apply_homography(h, px);
    CHECK((back - road.head<2>()).norm() < 1e-6);
  }

  // A point raised above the plane lands elsewhere.
  const Vec3 raised(2.0, 30.0, 0.5);
  const Eigen::Vector2d back = apply_homography(h, project_pinhole(road_to_camera(raised, pose), k));
  CHECK((back - raised.head<2>()).norm() > 0.1);

  Mat3 singular = k;
  singular(1, 1) = 0.0;
  CHECK_THROWS_AS(ipm_homography(pose, singular), std::invalid_argument);
}
