#include <doctest.h>

#include "tilelane/polyline.hpp"
#include "tilelane/scenegen.hpp"

#include <cmath>

using namespace tilelane;

TEST_CASE("polyline length is the BEV arc length") {
  const Polyline l{{0, 0, 0}, {3, 4, 10}, {3, 10, -2}};
  CHECK(polyline_length(l) == doctest::Approx(11.0));
  CHECK(polyline_length({}) == 0.0);
  CHECK(polyline_length({{1, 1, 1}}) == 0.0);
}

TEST_CASE("nearest point interpolates height") {
  const Polyline l{{0, 0, 0}, {0, 10, 2}};
  const NearestPoint np = nearest_on_polyline(l, Vec2(1.0, 5.0));
  CHECK(np.distance == doctest::Approx(1.0));
  CHECK(np.point.z() == doctest::Approx(1.0));
  CHECK(np.segment == 0);
  CHECK(np.t == doctest::Approx(0.5));
  const NearestPoint past = nearest_on_polyline(l, Vec2(0.0, 12.0));
  CHECK(past.distance == doctest::Approx(2.0));
  CHECK(past.t == doctest::Approx(1.0));
  CHECK_THROWS(nearest_on_polyline({}, Vec2(0, 0)));
}

TEST_CASE("nearest point agrees with dense sampling") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    Polyline l;
    for (int k = 0; k < 6; ++k) l.emplace_back(rng.uniform(-5, 5), rng.uniform(0, 20), 0.0);
    const Vec2 p(rng.uniform(-6, 6), rng.uniform(-1, 21));
    double brute = 1e9;
    for (size_t k = 0; k + 1 < l.size(); ++k) {
      for (int s = 0; s <= 2000; ++s) {
        const Vec3 q = l[k] + (l[k + 1] - l[k]) * (s / 2000.0);
        brute = std::min(brute, (q.head<2>() - p).norm());
      }
    }
    const double d = nearest_on_polyline(l, p).distance;
    CHECK(d <= brute + 1e-12);
    CHECK(d >= brute - 0.01);
  }
}

TEST_CASE("midpoint resampling conserves length") {
  const Polyline l{{0, 0, 0}, {0, 1.2, 0}, {2, 1.2, 0}};
  const auto s = resample_midpoints(l, 0.5);
  double total = 0.0;
  for (const ArcSample& a : s) {
    CHECK(a.weight <= 0.5 + 1e-12);
    total += a.weight;
  }
  CHECK(total == doctest::Approx(3.2));
  CHECK(s.front().point.y() == doctest::Approx(0.2));
}

TEST_CASE("clipping keeps the inside pieces") {
  const Rect r{0, 0, 1, 1};
  const Polyline crossing{{-1, 0.5, 0}, {2, 0.5, 3}};
  const auto pieces = clip_polyline(crossing, r);
  REQUIRE(pieces.size() == 1);
  REQUIRE(pieces[0].size() == 2);
  CHECK(pieces[0][0].x() == doctest::Approx(0.0));
  CHECK(pieces[0][1].x() == doctest::Approx(1.0));
  CHECK(pieces[0][0].z() == doctest::Approx(1.0));
  CHECK(pieces[0][1].z() == doctest::Approx(2.0));

  const Polyline outside{{2, 2, 0}, {3, 3, 0}};
  CHECK(clip_polyline(outside, r).empty());

  const Polyline zigzag{{-1, 0.2, 0}, {0.5, 0.2, 0}, {0.5, 2, 0}, {0.7, 2, 0}, {0.7, 0.5, 0}, {0.8, 0.5, 0}};
  const auto z = clip_polyline(zigzag, r);
  CHECK(z.size() == 2);
  double inside = 0.0;
  for (const auto& p : z) inside += polyline_length(p);
  CHECK(inside == doctest::Approx(0.5 + 0.8 + 0.5 + 0.1));
}

TEST_CASE("segment to rectangle distance") {
  const Rect r{0, 0, 1, 1};
  CHECK(segment_rect_distance(Vec2(-1, 0.5), Vec2(2, 0.5), r) == 0.0);
  CHECK(segment_rect_distance(Vec2(2, 0), Vec2(2, 1), r) == doctest::Approx(1.0));
  CHECK(segment_rect_distance(Vec2(2, 2), Vec2(3, 3), r) == doctest::Approx(std::sqrt(2.0)));
  CHECK(point_segment_distance(Vec2(0, 1), Vec2(-1, 0), Vec2(1, 0)) == doctest::Approx(1.0));
  CHECK(point_segment_distance(Vec2(3, 0), Vec2(0, 0), Vec2(0, 0)) == doctest::Approx(3.0));
}
