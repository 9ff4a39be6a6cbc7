#include <doctest.h>

#include "tilelane/scenegen.hpp"
#include "tilelane/serialization.hpp"
#include "tilelane/tilecodec.hpp"

#include <cmath>
#include <set>

using namespace tilelane;

namespace {

bool same_scene(const Scene& a, const Scene& b) {
  if (a.seed != b.seed || a.topology != b.topology || a.lanes.size() != b.lanes.size()) return false;
  if (a.pose.pitch != b.pose.pitch || a.pose.height != b.pose.height) return false;
  for (size_t l = 0; l < a.lanes.size(); ++l) {
    if (a.lanes[l].points != b.lanes[l].points) return false;
  }
  return true;
}

SceneConfig with_topology(Topology t) {
  SceneConfig c;
  c.topology = t;
  return c;
}

// Signed lateral offset of p from the polyline, positive to the right of travel.
double signed_offset(const Polyline& line, const Vec2& p) {
  const NearestPoint np = nearest_on_polyline(line, p);
  const Vec2 d = (line[np.segment + 1] - line[np.segment]).head<2>();
  const Vec2 rel = p - np.point.head<2>();
  return (d.x() * rel.y() - d.y() * rel.x()) < 0 ? np.distance : -np.distance;
}

}  // namespace

TEST_CASE("generation is deterministic per seed") {
  const SceneConfig cfg;
  const GridConfig grid;
  for (std::uint64_t seed : {0ULL, 7ULL, 12345ULL}) {
    const Scene a = generate_scene(cfg, grid, seed);
    const Scene b = generate_scene(cfg, grid, seed);
    CHECK(same_scene(a, b));
    CHECK(scene_to_json(a).dump() == scene_to_json(b).dump());
    const auto ra = rasterize_observations(a, grid, NoiseConfig{}, seed);
    const auto rb = rasterize_observations(b, grid, NoiseConfig{}, seed);
    CHECK(raster_to_json(ra).dump() == raster_to_json(rb).dump());
  }
  CHECK_FALSE(same_scene(generate_scene(cfg, grid, 1), generate_scene(cfg, grid, 2)));
}

TEST_CASE("mixed topology cycles with the seed") {
  const SceneConfig cfg;
  const GridConfig grid;
  std::set<Topology> seen;
  for (std::uint64_t s = 0; s < 6; ++s) seen.insert(generate_scene(cfg, grid, s).topology);
  CHECK(seen.size() == 6);
}

TEST_CASE("lane points lie on the surface and are well formed") {
  const GridConfig grid;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const Scene s = generate_scene(SceneConfig{}, grid, seed);
    CHECK(s.lanes.size() >= 1);
    CHECK(s.lanes.size() <= 8);
    for (const Lane3D& l : s.lanes) {
      REQUIRE(l.points.size() >= 2);
      for (size_t k = 0; k < l.points.size(); ++k) {
        const Vec3& p = l.points[k];
        CHECK(p.z() == s.surface.height(p.x(), p.y()));
        if (k > 0) CHECK((p - l.points[k - 1]).head<2>().norm() > 0.0);
      }
    }
  }
}

TEST_CASE("flat parallel world has zero heights") {
  SceneConfig cfg = with_topology(Topology::kParallel);
  cfg.max_amplitude = 0.0;
  const Scene s = generate_scene(cfg, GridConfig{}, 3);
  for (const Lane3D& l : s.lanes) {
    for (const Vec3& p : l.points) CHECK(p.z() == 0.0);
  }
}

TEST_CASE("split scenes share exactly one point and diverge") {
  const GridConfig grid;
  SceneConfig cfg = with_topology(Topology::kSplit);
  cfg.max_amplitude = 0.0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Scene s = generate_scene(cfg, grid, seed);
    int shared_pairs = 0;
    for (size_t a = 0; a < s.lanes.size(); ++a) {
      for (size_t b = 0; b < s.lanes.size(); ++b) {
        if (a == b) continue;
        const Vec3& start = s.lanes[b].points.front();
        bool hit = false;
        for (const Vec3& p : s.lanes[a].points) hit = hit || (p - start).norm() < 1e-9;
        if (!hit) continue;
        ++shared_pairs;
        double prev = 0.0;
        for (const Vec3& p : s.lanes[b].points) {
          const double d = std::abs(signed_offset(s.lanes[a].points, p.head<2>()));
          CHECK(d >= prev - 1e-3);
          prev = std::max(prev, d);
        }
      }
    }
    CHECK(shared_pairs == 1);
  }
}

TEST_CASE("merge scenes end a lane on another lane") {
  const GridConfig grid;
  const SceneConfig cfg = with_topology(Topology::kMerge);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scene s = generate_scene(cfg, grid, seed);
    int shared = 0;
    for (size_t a = 0; a < s.lanes.size(); ++a) {
      for (size_t b = 0; b < s.lanes.size(); ++b) {
        if (a == b) continue;
        for (const Vec3& p : s.lanes[a].points) shared += (p - s.lanes[b].points.back()).norm() < 1e-9;
      }
    }
    CHECK(shared == 1);
  }
}

TEST_CASE("short-start scenes contain a lane beginning 20 m ahead") {
  const SceneConfig cfg = with_topology(Topology::kShortStart);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scene s = generate_scene(cfg, GridConfig{}, seed);
    bool found = false;
    for (const Lane3D& l : s.lanes) found = found || l.points.front().y() >= 20.0;
    CHECK(found);
  }
}

TEST_CASE("invalid configs are rejected") {
  SceneConfig c;
  c.lane_spacing = 0.0;
  CHECK_THROWS_AS(generate_scene(c, GridConfig{}, 0), std::invalid_argument);
  NoiseConfig n;
  n.dropout = 1.5;
  CHECK_THROWS_AS(n.validate(), std::invalid_argument);
}

TEST_CASE("raster dimensions and value range") {
  const GridConfig grid;
  const Scene s = generate_scene(SceneConfig{}, grid, 4);
  const ObservationRaster r = rasterize_observations(s, grid, NoiseConfig{}, 4);
  CHECK(r.width == 4 * grid.width_tiles);
  CHECK(r.height == 4 * grid.height_tiles);
  CHECK(r.evidence.size() == static_cast<size_t>(r.width * r.height));
  for (float e : r.evidence) {
    CHECK(e >= 0.0f);
    CHECK(e <= 1.0f);
  }
}

TEST_CASE("noiseless painting lights exactly the lane cells") {
  const GridConfig grid;
  NoiseConfig noise{};
  noise.paint_radius = 0.0;
  noise.jitter_m = 0.0;
  noise.dropout = 0.0;
  noise.max_occlusions = 0;
  noise.height_noise = 0.0;
  noise.clutter = 0.0;
  const Scene s = generate_scene(SceneConfig{}, grid, 9);
  const ObservationRaster r = rasterize_observations(s, grid, noise, 9);
  std::vector<char> expect(r.evidence.size(), 0);
  for (const Lane3D& l : s.lanes) {
    for (int idx : cells_near_polyline(r, l.points, 0.0)) expect[idx] = 1;
  }
  int lit = 0;
  for (size_t k = 0; k < expect.size(); ++k) {
    CHECK(r.evidence[k] == (expect[k] ? 1.0f : 0.0f));
    lit += expect[k];
  }
  CHECK(lit > 0);
}

TEST_CASE("total dropout gives an empty raster") {
  NoiseConfig noise;
  noise.dropout = 1.0;
  noise.clutter = 0.0;
  const GridConfig grid;
  const ObservationRaster r = rasterize_observations(generate_scene(SceneConfig{}, grid, 2), grid, noise, 2);
  for (float e : r.evidence) CHECK(e == 0.0f);
}

TEST_CASE("dropout fraction follows the binomial bound") {
  const GridConfig grid;
  NoiseConfig noise;
  noise.jitter_m = 0.0;
  noise.max_occlusions = 0;
  noise.clutter = 0.0;
  long painted = 0, dropped = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scene s = generate_scene(SceneConfig{}, grid, seed);
    const ObservationRaster r = rasterize_observations(s, grid, noise, seed);
    std::vector<char> cells(r.evidence.size(), 0);
    for (const Lane3D& l : s.lanes) {
      for (int idx : cells_near_polyline(r, l.points, noise.paint_radius)) cells[idx] = 1;
    }
    for (size_t k = 0; k < cells.size(); ++k) {
      if (!cells[k]) continue;
      ++painted;
      dropped += r.evidence[k] == 0.0f;
    }
  }
  const double p = noise.dropout;
  const double sigma = std::sqrt(p * (1 - p) / painted);
  CHECK(std::abs(static_cast<double>(dropped) / painted - p) <= 3.0 * sigma);
}

TEST_CASE("every lane crossing the coverage gets an occupied tile") {
  const GridConfig grid;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const Scene s = generate_scene(SceneConfig{}, grid, seed);
    const TargetGrid t = encode_targets(s, grid, 16);
    std::set<int> ids;
    for (const TileTarget& tt : t.tiles) {
      if (tt.occupied) ids.insert(tt.lane_id);
    }
    for (const Lane3D& l : s.lanes) CHECK(ids.count(l.id) == 1);
  }
}

TEST_CASE("split and merge scenes put two lanes in adjacent tiles") {
  const GridConfig grid;
  for (Topology topo : {Topology::kSplit, Topology::kMerge}) {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const TargetGrid t = encode_targets(generate_scene(with_topology(topo), grid, seed), grid, 16);
      bool found = false;
      for (int j = 0; j < grid.height_tiles && !found; ++j) {
        for (int i = 0; i + 1 < grid.width_tiles && !found; ++i) {
          const TileTarget& a = t.tiles[grid.flat(i, j)];
          const TileTarget& b = t.tiles[grid.flat(i + 1, j)];
          found = a.occupied && b.occupied && a.lane_id != b.lane_id;
        }
      }
      hits += found;
    }
    CHECK(hits == 10);
  }
}
