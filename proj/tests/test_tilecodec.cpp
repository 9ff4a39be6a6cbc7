#include <doctest.h>

#include "tilelane/tilecodec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace tilelane;

namespace {

constexpr int kBins = 16;

Lane3D straight_lane(int id, Vec2 a, Vec2 b, double step = 1.0) {
  Lane3D l;
  l.id = id;
  const int n = static_cast<int>(std::ceil((b - a).norm() / step));
  for (int k = 0; k <= n; ++k) {
    const Vec2 p = a + (b - a) * (static_cast<double>(k) / n);
    l.points.emplace_back(p.x(), p.y(), 0.0);
  }
  return l;
}

Scene scene_of(std::vector<Lane3D> lanes) {
  Scene s;
  s.lanes = std::move(lanes);
  return s;
}

double max_roundtrip_error(const Scene& scene, const GridConfig& grid, double* max_dz) {
  const TargetGrid t = encode_targets(scene, grid, kBins);
  const auto decoded = decode_tiles(perfect_predictions(t), scene.pose, 0.3);
  double worst = 0.0;
  for (const DecodedTile& d : decoded) {
    const int id = t.at(d.i, d.j).lane_id;
    const auto it = std::find_if(scene.lanes.begin(), scene.lanes.end(),
                                 [&](const Lane3D& l) { return l.id == id; });
    const NearestPoint np = nearest_on_polyline(it->points, d.road_point.head<2>());
    worst = std::max(worst, np.distance);
    *max_dz = std::max(*max_dz, std::abs(np.point.z() - d.road_point.z()));
  }
  return worst;
}

}  // namespace

TEST_CASE("angle targets at a bin center") {
  const AngleEncoding e = angle_targets(bin_center(3, kBins), kBins);
  for (int i = 0; i < kBins; ++i) CHECK(e.probs[i] == doctest::Approx(i == 3 ? 1.0 : 0.0));
  CHECK(e.residuals[3] == doctest::Approx(0.0));
  CHECK(e.mask[2] + e.mask[3] + e.mask[4] == 3);
  CHECK(std::accumulate(e.mask.begin(), e.mask.end(), 0) == 3);
}

TEST_CASE("angle targets midway between two bins") {
  const AngleEncoding e = angle_targets(0.5 * (bin_center(3, kBins) + bin_center(4, kBins)), kBins);
  CHECK(e.probs[3] == doctest::Approx(0.5));
  CHECK(e.probs[4] == doctest::Approx(0.5));
}

TEST_CASE("angle targets wrap past the last bin") {
  const double w = bin_width(kBins);
  const AngleEncoding e = angle_targets(bin_center(kBins - 1, kBins) + 0.3 * w, kBins);
  CHECK(e.probs[kBins - 1] == doctest::Approx(0.7));
  CHECK(e.probs[0] == doctest::Approx(0.3));
  CHECK(e.mask[0] == 1);
  CHECK(e.mask[kBins - 2] == 1);
  CHECK(e.mask[kBins - 1] == 1);
}

TEST_CASE("angle target properties hold around the circle") {
  const double w = bin_width(kBins);
  for (int k = 0; k < 5000; ++k) {
    const double phi = -3.0 * kPi + 6.0 * kPi * k / 4999.0;
    const AngleEncoding e = angle_targets(phi, kBins);
    int nonzero = 0;
    double sum = 0.0;
    for (int i = 0; i < kBins; ++i) {
      CHECK(e.probs[i] >= 0.0);
      CHECK(e.probs[i] <= 1.0);
      nonzero += e.probs[i] > 0.0;
      sum += e.probs[i];
      // The nearest bin lies within half a bin; its neighbours within 1.5 bins.
      if (e.mask[i]) CHECK(std::abs(e.residuals[i]) <= 1.5 * w + 1e-12);
      CHECK(std::abs(wrap_angle(bin_center(i, kBins) + e.residuals[i] - phi)) < 1e-9);
    }
    CHECK(nonzero <= 2);
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    CHECK(e.mask[nearest_bin(phi, kBins)] == 1);
  }
  CHECK_THROWS_AS(angle_targets(0.0, 3), std::invalid_argument);
}

TEST_CASE("straight longitudinal lane encodes in closed form") {
  const GridConfig grid;
  const Scene s = scene_of({straight_lane(0, Vec2(0.3, 0.0), Vec2(0.3, 80.0))});
  const TargetGrid t = encode_targets(s, grid, kBins);
  const int column = static_cast<int>(std::floor((0.3 - grid.origin.x()) / grid.tile_width));
  for (int j = 0; j < grid.height_tiles; ++j) {
    for (int i = 0; i < grid.width_tiles; ++i) {
      const TileTarget& tt = t.at(i, j);
      if (i != column) {
        CHECK_FALSE(tt.occupied);
        continue;
      }
      REQUIRE(tt.occupied);
      // The decoded point is center + r * (-sin phi, cos phi); at phi = pi/2
      // a lane to the right of the center has negative r.
      CHECK(tt.r == doctest::Approx(tile_center(grid, i, j).x() - 0.3));
      CHECK(tt.phi == doctest::Approx(kPi / 2));
      CHECK(tt.dz == doctest::Approx(0.0));
      CHECK(tt.lane_id == 0);
      CHECK(segment_point_bev(tt.r, tt.phi, tile_center(grid, i, j)).x() == doctest::Approx(0.3));
    }
  }
}

TEST_CASE("direction follows travel") {
  const GridConfig grid;
  const Scene s = scene_of({straight_lane(0, Vec2(5.0, 60.0), Vec2(-5.0, 10.0))});
  const TargetGrid t = encode_targets(s, grid, kBins);
  const double expected = std::atan2(-50.0, -10.0);
  int n = 0;
  for (const TileTarget& tt : t.tiles) {
    if (!tt.occupied) continue;
    ++n;
    CHECK(std::abs(wrap_angle(tt.phi - expected)) < 1e-9);
  }
  CHECK(n > 0);
}

TEST_CASE("height is fitted at the foot") {
  const GridConfig grid;
  Lane3D l = straight_lane(0, Vec2(0.3, 0.0), Vec2(0.3, 80.0));
  for (Vec3& p : l.points) p.z() = 0.02 * p.y() + 0.1;
  const TargetGrid t = encode_targets(scene_of({l}), grid, kBins);
  for (int j = 0; j < grid.height_tiles; ++j) {
    const TileTarget& tt = t.at(8, j);
    REQUIRE(tt.occupied);
    CHECK(tt.dz == doctest::Approx(0.02 * tile_center(grid, 8, j).y() + 0.1));
  }
}

TEST_CASE("short corner clips and lane ends leave tiles empty") {
  const GridConfig grid;
  // Cuts 0.1 m diagonally across the corner of tile (8, 0).
  const Lane3D corner = straight_lane(0, Vec2(-1.0, 1.07), Vec2(1.0, -0.93), 0.5);
  const TargetGrid t = encode_targets(scene_of({corner}), grid, kBins);
  CHECK_FALSE(t.at(8, 0).occupied);

  // Ends 0.5 m into tile (8, 3), short of the foot from its center.
  const Lane3D stop = straight_lane(0, Vec2(0.3, 0.0), Vec2(0.3, 9.5));
  const TargetGrid u = encode_targets(scene_of({stop}), grid, kBins);
  CHECK(u.at(8, 2).occupied);
  CHECK_FALSE(u.at(8, 3).occupied);
  TileFitOptions keep;
  keep.foot_on_lane = false;
  CHECK(encode_targets(scene_of({stop}), grid, kBins, keep).at(8, 3).occupied);
}

TEST_CASE("shared tiles keep the lane nearest the center") {
  const GridConfig grid;
  const Vec2 c = tile_center(grid, 8, 5);
  const Scene s = scene_of({straight_lane(0, Vec2(c.x() + 0.5, 0.0), Vec2(c.x() + 0.5, 80.0)),
                            straight_lane(1, Vec2(c.x() - 0.2, 0.0), Vec2(c.x() - 0.2, 80.0))});
  const TargetGrid t = encode_targets(s, grid, kBins);
  CHECK(t.at(8, 5).lane_id == 1);
  CHECK(t.at(8, 5).r == doctest::Approx(0.2));
}

TEST_CASE("lane order only relabels ids") {
  const GridConfig grid;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const Scene s = generate_scene(SceneConfig{}, grid, seed);
    Scene rev = s;
    std::reverse(rev.lanes.begin(), rev.lanes.end());
    const TargetGrid a = encode_targets(s, grid, kBins);
    const TargetGrid b = encode_targets(rev, grid, kBins);
    for (size_t k = 0; k < a.tiles.size(); ++k) {
      REQUIRE(a.tiles[k].occupied == b.tiles[k].occupied);
      if (!a.tiles[k].occupied) continue;
      CHECK(a.tiles[k].r == doctest::Approx(b.tiles[k].r));
      CHECK(a.tiles[k].phi == doctest::Approx(b.tiles[k].phi));
      CHECK(a.tiles[k].dz == doctest::Approx(b.tiles[k].dz));
    }
  }
}

TEST_CASE("roundtrip through perfect predictions") {
  const GridConfig grid;
  double worst_flat = 0.0, worst_curve = 0.0, worst_dz = 0.0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    SceneConfig cfg;
    cfg.curve_curvature_max = 0.02;
    const Scene s = generate_scene(cfg, grid, seed);
    double& worst = s.topology == Topology::kCurve ? worst_curve : worst_flat;
    worst = std::max(worst, max_roundtrip_error(s, grid, &worst_dz));
  }
  CHECK(worst_flat <= 0.15);
  CHECK(worst_curve <= 0.35);
  CHECK(worst_dz <= 0.1);
}

TEST_CASE("decode honours the threshold") {
  const GridConfig grid;
  const Scene s = generate_scene(SceneConfig{}, grid, 5);
  PredictionGrid p = perfect_predictions(encode_targets(s, grid, kBins));
  Rng rng(1);
  for (TilePrediction& t : p.tiles) t.score_logit = rng.uniform(-4, 4);
  for (double thr : {0.0, 0.1, 0.3, 0.5, 0.9, 1.0}) {
    const auto d = decode_tiles(p, s.pose, thr);
    const auto expected = std::count_if(p.tiles.begin(), p.tiles.end(),
                                        [&](const TilePrediction& t) { return t.score() >= thr; });
    CHECK(static_cast<long>(d.size()) == expected);
  }
  for (TilePrediction& t : p.tiles) t.score_logit = -10.0;
  CHECK(decode_tiles(p, s.pose, 0.3).empty());
  CHECK_THROWS_AS(decode_tiles(p, s.pose, 1.5), std::invalid_argument);
}

TEST_CASE("decoded geometry matches the geometry module") {
  const GridConfig grid;
  const Scene s = generate_scene(SceneConfig{}, grid, 8);
  PredictionGrid p = perfect_predictions(encode_targets(s, grid, kBins));
  for (TilePrediction& t : p.tiles) t.log_var = {std::log(0.04), std::log(0.01), std::log(0.09)};
  for (const DecodedTile& d : decode_tiles(p, s.pose, 0.3)) {
    CHECK((d.point - segment_to_camera(d.r, d.phi, d.dz, d.center, s.pose)).norm() < 1e-12);
    CHECK(d.direction.norm() == doctest::Approx(1.0));
    CHECK(d.variance[0] == doctest::Approx(0.04));
    const Covariance3 expected = propagate_covariance(0.04, 0.01, 0.09, d.r, d.phi, d.dz, d.center, s.pose);
    CHECK((d.covariance - expected).norm() < 1e-12);

    DecodedTile scaled = d;
    rescale_variances(scaled, {2.0, 2.0, 2.0}, s.pose);
    CHECK((scaled.covariance - 2.0 * d.covariance).norm() < 1e-12);
  }
}
