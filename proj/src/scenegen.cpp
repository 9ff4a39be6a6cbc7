#include "tilelane/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace tilelane {

int Rng::uniform_int(int lo, int hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(engine_() % span);
}

double Rng::normal() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double mag = std::sqrt(-2.0 * std::log(u1));
  spare_ = mag * std::sin(kTwoPi * u2);
  return mag * std::cos(kTwoPi * u2);
}

std::string_view to_string(Topology t) {
  switch (t) {
    case Topology::kParallel: return "parallel";
    case Topology::kSplit: return "split";
    case Topology::kMerge: return "merge";
    case Topology::kShortStart: return "short-start";
    case Topology::kPerpendicular: return "perpendicular";
    case Topology::kCurve: return "curve";
  }
  return "unknown";
}

Topology topology_from_string(std::string_view name) {
  for (Topology t : kAllTopologies) {
    if (to_string(t) == name) return t;
  }
  throw std::invalid_argument("unknown topology '" + std::string(name) + "'");
}

double Surface::height(double x, double y) const {
  double z = 0.0;
  for (const auto& w : waves) {
    const double k = kTwoPi / w.wavelength;
    const double arg = k * (x * std::cos(w.direction) + y * std::sin(w.direction));
    z += w.amplitude * (std::sin(arg + w.phase) - std::sin(w.phase));
  }
  return z;
}

void SceneConfig::validate() const {
  auto finite_pos = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!finite_pos(lane_spacing)) throw std::invalid_argument("lane_spacing must be > 0");
  if (min_lanes < 1 || max_lanes < min_lanes || max_lanes > 7) {
    throw std::invalid_argument("lane counts must satisfy 1 <= min_lanes <= max_lanes <= 7");
  }
  if (!std::isfinite(curve_curvature_min) || !std::isfinite(curve_curvature_max) ||
      curve_curvature_min < 0.0 || curve_curvature_max < curve_curvature_min) {
    throw std::invalid_argument("curvature bounds must be finite and ordered");
  }
  if (!std::isfinite(max_heading) || !std::isfinite(max_quadratic) || !std::isfinite(max_cubic)) {
    throw std::invalid_argument("centerline bounds must be finite");
  }
  if (max_amplitude < 0.0 || !finite_pos(min_wavelength) || max_wavelength < min_wavelength) {
    throw std::invalid_argument("invalid surface parameters");
  }
  if (!finite_pos(sample_step) || !finite_pos(split_ramp)) {
    throw std::invalid_argument("sample_step and split_ramp must be > 0");
  }
  if (short_start_max < short_start_min) {
    throw std::invalid_argument("short_start_max < short_start_min");
  }
  if (!finite_pos(height_min) || height_max < height_min || pitch_max < pitch_min ||
      std::abs(pitch_min) >= 0.5 * kPi || std::abs(pitch_max) >= 0.5 * kPi) {
    throw std::invalid_argument("invalid camera pose ranges");
  }
}

namespace {

using Curve2 = std::vector<Vec2>;

double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

Curve2 sample_lateral_function(const std::function<double(double)>& x_of_y, double y0,
                               double y1, double dy = 0.05) {
  Curve2 out;
  const int n = std::max(1, static_cast<int>(std::ceil((y1 - y0) / dy)));
  for (int k = 0; k <= n; ++k) {
    const double y = y0 + (y1 - y0) * k / n;
    out.emplace_back(x_of_y(y), y);
  }
  return out;
}

Curve2 sample_longitudinal_function(const std::function<double(double)>& y_of_x, double x0,
                                    double x1, double dx = 0.05) {
  Curve2 out;
  const int n = std::max(1, static_cast<int>(std::ceil((x1 - x0) / dx)));
  for (int k = 0; k <= n; ++k) {
    const double x = x0 + (x1 - x0) * k / n;
    out.emplace_back(x, y_of_x(x));
  }
  return out;
}

// Resamples at uniform arc-length steps; the first and last points are kept
// bit-exact.
Curve2 resample_uniform(const Curve2& dense, double step) {
  Curve2 out;
  if (dense.size() < 2) return dense;
  out.push_back(dense.front());
  double carry = 0.0;  // arc length since last emitted point
  for (size_t k = 0; k + 1 < dense.size(); ++k) {
    const Vec2 a = dense[k];
    const Vec2 b = dense[k + 1];
    const double seg = (b - a).norm();
    double pos = 0.0;
    while (carry + (seg - pos) >= step) {
      pos += step - carry;
      carry = 0.0;
      out.push_back(a + (pos / seg) * (b - a));
    }
    carry += seg - pos;
  }
  if ((out.back() - dense.back()).norm() < 1e-6) {
    out.back() = dense.back();
  } else {
    out.push_back(dense.back());
  }
  return out;
}

enum class Anchor { kFirstInside, kFirstPoint, kLastPoint };

// Keeps the run of vertices inside the coverage that contains the anchor and
// appends boundary crossings at the cut ends.
std::optional<Polyline> finalize_lane(const Curve2& resampled, const Rect& cover,
                                      const Surface& surface, Anchor anchor,
                                      double min_length) {
  const int n = static_cast<int>(resampled.size());
  int start = -1;
  if (anchor == Anchor::kFirstPoint) {
    if (!cover.contains(resampled.front())) return std::nullopt;
    start = 0;
  } else if (anchor == Anchor::kLastPoint) {
    if (!cover.contains(resampled.back())) return std::nullopt;
    start = n - 1;
    while (start > 0 && cover.contains(resampled[start - 1])) --start;
  } else {
    for (int k = 0; k < n; ++k) {
      if (cover.contains(resampled[k])) {
        start = k;
        break;
      }
    }
    if (start < 0) return std::nullopt;
  }
  int end = start;
  while (end + 1 < n && cover.contains(resampled[end + 1])) ++end;

  Curve2 pts;
  auto crossing = [&](const Vec2& inside, const Vec2& outside) {
    Polyline seg{Vec3(inside.x(), inside.y(), 0.0), Vec3(outside.x(), outside.y(), 0.0)};
    auto pieces = clip_polyline(seg, cover);
    if (pieces.empty()) return inside;
    return Vec2(pieces.front().back().head<2>());
  };
  if (start > 0) {
    const Vec2 c = crossing(resampled[start], resampled[start - 1]);
    if ((c - resampled[start]).norm() > 1e-3) pts.push_back(c);
  }
  for (int k = start; k <= end; ++k) pts.push_back(resampled[k]);
  if (end + 1 < n) {
    const Vec2 c = crossing(resampled[end], resampled[end + 1]);
    if ((c - resampled[end]).norm() > 1e-3) pts.push_back(c);
  }
  if (pts.size() < 2) return std::nullopt;

  Polyline lane;
  lane.reserve(pts.size());
  for (const Vec2& p : pts) lane.emplace_back(p.x(), p.y(), surface.height(p.x(), p.y()));
  if (polyline_length(lane) < min_length) return std::nullopt;
  return lane;
}

struct BaseCurve {
  double heading, quad, cubic;
  double x(double y) const { return heading * y + quad * y * y + cubic * y * y * y; }
};

std::vector<double> lane_offsets(int n, double spacing, double shift) {
  std::vector<double> out;
  for (int k = 0; k < n; ++k) out.push_back((k - 0.5 * (n - 1)) * spacing + shift);
  return out;
}

class SceneBuilder {
 public:
  SceneBuilder(const SceneConfig& cfg, const GridConfig& grid, Rng& rng, Scene& scene)
      : cfg_(cfg), rng_(rng), scene_(scene) {
    cover_ = {grid.x_min(), grid.y_min(), grid.x_max(), grid.y_max()};
    far_ = grid.y_max() + 5.0;
  }

  void build(Topology topo) {
    switch (topo) {
      case Topology::kParallel: parallel(); break;
      case Topology::kSplit: split_or_merge(true); break;
      case Topology::kMerge: split_or_merge(false); break;
      case Topology::kShortStart: short_start(); break;
      case Topology::kPerpendicular: perpendicular(); break;
      case Topology::kCurve: curve(); break;
    }
  }

 private:
  BaseCurve random_base() {
    return {rng_.uniform(-cfg_.max_heading, cfg_.max_heading),
            rng_.uniform(-cfg_.max_quadratic, cfg_.max_quadratic),
            rng_.uniform(-cfg_.max_cubic, cfg_.max_cubic)};
  }

  double random_shift() { return rng_.uniform(-0.25, 0.25) * cfg_.lane_spacing; }

  // Returns the index of the added lane, or -1 if nothing survived clipping.
  int add(const Curve2& dense, Anchor anchor = Anchor::kFirstInside) {
    auto lane = finalize_lane(resample_uniform(dense, cfg_.sample_step), cover_,
                              scene_.surface, anchor, cfg_.min_lane_length);
    if (!lane) return -1;
    Lane3D l;
    l.id = static_cast<int>(scene_.lanes.size());
    l.points = std::move(*lane);
    scene_.lanes.push_back(std::move(l));
    return static_cast<int>(scene_.lanes.size()) - 1;
  }

  std::vector<int> add_parallel(const BaseCurve& base, const std::vector<double>& offs,
                                double y0, double y1) {
    std::vector<int> out;
    for (double o : offs) {
      out.push_back(add(sample_lateral_function([&](double y) { return base.x(y) + o; }, y0, y1)));
    }
    return out;
  }

  void parallel() {
    const int n = rng_.uniform_int(cfg_.min_lanes, cfg_.max_lanes);
    const BaseCurve base = random_base();
    add_parallel(base, lane_offsets(n, cfg_.lane_spacing, random_shift()), 0.0, far_);
  }

  void split_or_merge(bool split) {
    const int n = rng_.uniform_int(cfg_.min_lanes, std::max(cfg_.min_lanes, std::min(cfg_.max_lanes, 3)));
    const BaseCurve base = random_base();
    const double shift = random_shift();
    const auto offs = lane_offsets(n, cfg_.lane_spacing, shift);
    // Branch toward the side with more room.
    const int side = shift > 0.0 ? -1 : 1;
    const size_t parent_idx = side > 0 ? offs.size() - 1 : 0;
    std::vector<double> ordered;
    ordered.push_back(offs[parent_idx]);
    for (size_t k = 0; k < offs.size(); ++k) {
      if (k != parent_idx) ordered.push_back(offs[k]);
    }
    const auto lanes = add_parallel(base, ordered, 0.0, far_);
    if (lanes.front() < 0) return;
    const Polyline parent_pts = scene_.lanes[lanes.front()].points;
    const double parent_off = ordered.front();
    const double ramp = cfg_.split_ramp;
    const double spacing = cfg_.lane_spacing;
    const double lo = split ? 10.0 : 30.0;
    const double hi = split ? 40.0 : 65.0;
    std::vector<size_t> candidates;
    for (size_t k = 0; k < parent_pts.size(); ++k) {
      const double y = parent_pts[k].y();
      if (y >= lo && y <= hi) candidates.push_back(k);
    }
    if (candidates.empty()) return;
    const Vec3 anchor =
        parent_pts[candidates[rng_.uniform_int(0, static_cast<int>(candidates.size()) - 1)]];
    const double ya = anchor.y();
    if (split) {
      auto dense = sample_lateral_function(
          [&](double y) { return base.x(y) + parent_off + side * spacing * smoothstep((y - ya) / ramp); },
          ya, far_);
      dense.front() = anchor.head<2>();
      add(dense, Anchor::kFirstPoint);
    } else {
      auto dense = sample_lateral_function(
          [&](double y) {
            return base.x(y) + parent_off + side * spacing * (1.0 - smoothstep((y - (ya - ramp)) / ramp));
          },
          0.0, ya);
      dense.back() = anchor.head<2>();
      add(dense, Anchor::kLastPoint);
    }
  }

  void short_start() {
    const int n = rng_.uniform_int(cfg_.min_lanes, std::max(cfg_.min_lanes, std::min(cfg_.max_lanes, 3)));
    const BaseCurve base = random_base();
    const double shift = random_shift();
    auto offs = lane_offsets(n, cfg_.lane_spacing, shift);
    add_parallel(base, offs, 0.0, far_);
    const int side = shift > 0.0 ? -1 : 1;
    const double extra = side > 0 ? offs.back() + cfg_.lane_spacing : offs.front() - cfg_.lane_spacing;
    const double y0 = rng_.uniform(cfg_.short_start_min, cfg_.short_start_max);
    add(sample_lateral_function([&](double y) { return base.x(y) + extra; }, y0, far_));
  }

  void perpendicular() {
    const BaseCurve base = random_base();
    const double y_stop = rng_.uniform(15.0, 35.0);
    add_parallel(base, lane_offsets(2, cfg_.lane_spacing, random_shift()), 0.0, y_stop);
    const int n_cross = rng_.uniform_int(2, 3);
    const double slope = rng_.uniform(-0.08, 0.08);
    const double bend = rng_.uniform(-0.004, 0.004);
    const double y_first = y_stop + rng_.uniform(4.0, 8.0);
    for (int k = 0; k < n_cross; ++k) {
      const double yc = y_first + k * cfg_.lane_spacing;
      add(sample_longitudinal_function([&](double x) { return yc + slope * x + bend * x * x; },
                                       cover_.x0 - 3.0, cover_.x1 + 3.0));
    }
  }

  void curve() {
    const int n = rng_.uniform_int(cfg_.min_lanes, cfg_.max_lanes);
    const double kappa_mag = rng_.uniform(cfg_.curve_curvature_min, cfg_.curve_curvature_max);
    const double kappa = rng_.bernoulli(0.5) ? kappa_mag : -kappa_mag;
    const double heading0 = 0.5 * kPi + rng_.uniform(-cfg_.max_heading, cfg_.max_heading);
    // Start the base a little to the outside of the turn so more of it stays in view.
    const double x0 = kappa > 0.0 ? rng_.uniform(0.0, 3.0) : rng_.uniform(-3.0, 0.0);
    const double s_max = 130.0;
    for (double o : lane_offsets(n, cfg_.lane_spacing, random_shift())) {
      Curve2 dense;
      const int steps = static_cast<int>(s_max / 0.05);
      for (int k = 0; k <= steps; ++k) {
        const double s = s_max * k / steps;
        const double th = heading0 + kappa * s;
        Vec2 p;
        if (std::abs(kappa) < 1e-12) {
          p = Vec2(x0 + s * std::cos(heading0), s * std::sin(heading0));
        } else {
          p = Vec2(x0 + (std::sin(th) - std::sin(heading0)) / kappa,
                   -(std::cos(th) - std::cos(heading0)) / kappa);
        }
        // Right-hand normal; positive offsets go right at heading pi/2.
        p += o * Vec2(std::sin(th), -std::cos(th));
        dense.push_back(p);
      }
      add(dense);
    }
  }

  const SceneConfig& cfg_;
  Rng& rng_;
  Scene& scene_;
  Rect cover_{};
  double far_ = 0.0;
};

}  // namespace

Scene generate_scene(const SceneConfig& config, const GridConfig& grid, std::uint64_t seed) {
  config.validate();
  grid.validate();
  Rng rng(seed * 0x9E3779B97F4A7C15ULL + 0x2545F4914F6CDD1DULL);
  Scene scene;
  scene.seed = seed;
  scene.topology = config.topology ? *config.topology
                                   : kAllTopologies[seed % std::size(kAllTopologies)];
  scene.pose.pitch = rng.uniform(config.pitch_min, config.pitch_max);
  scene.pose.height = rng.uniform(config.height_min, config.height_max);
  for (int k = 0; k < config.surface_waves; ++k) {
    SurfaceWave w;
    w.amplitude = rng.uniform(0.0, config.max_amplitude);
    w.wavelength = rng.uniform(config.min_wavelength, config.max_wavelength);
    w.direction = rng.uniform(0.0, kTwoPi);
    w.phase = rng.uniform(0.0, kTwoPi);
    scene.surface.waves.push_back(w);
  }
  for (int attempt = 0; attempt < 16; ++attempt) {
    scene.lanes.clear();
    SceneBuilder(config, grid, rng, scene).build(scene.topology);
    if (!scene.lanes.empty()) break;
  }
  if (scene.lanes.empty()) {
    throw std::runtime_error("generate_scene: could not place any lane for seed " +
                             std::to_string(seed));
  }
  return scene;
}

void NoiseConfig::validate() const {
  if (paint_radius < 0.0 || jitter_m < 0.0 || height_noise < 0.0) {
    throw std::invalid_argument("noise magnitudes must be nonnegative");
  }
  if (dropout < 0.0 || dropout > 1.0 || clutter < 0.0 || clutter > 1.0) {
    throw std::invalid_argument("dropout and clutter must lie in [0, 1]");
  }
  if (max_occlusions < 0) throw std::invalid_argument("max_occlusions must be >= 0");
}

Rect ObservationRaster::cell_rect(int u, int v) const {
  const double x0 = origin.x() + u * cell_width;
  const double y0 = origin.y() + v * cell_length;
  return {x0, y0, x0 + cell_width, y0 + cell_length};
}

ObservationRaster make_raster(const GridConfig& grid, int upsample) {
  if (upsample < 1) throw std::invalid_argument("raster upsample factor must be >= 1");
  ObservationRaster r;
  r.width = grid.width_tiles * upsample;
  r.height = grid.height_tiles * upsample;
  r.cell_width = grid.tile_width / upsample;
  r.cell_length = grid.tile_length / upsample;
  r.origin = grid.origin;
  r.evidence.assign(static_cast<size_t>(r.width) * r.height, 0.0f);
  r.heights.assign(static_cast<size_t>(r.width) * r.height, 0.0f);
  return r;
}

std::vector<int> cells_near_polyline(const ObservationRaster& raster, const Polyline& line,
                                     double radius) {
  std::vector<char> hit(raster.evidence.size(), 0);
  for (size_t k = 0; k + 1 < line.size(); ++k) {
    const Vec2 a = line[k].head<2>();
    const Vec2 b = line[k + 1].head<2>();
    const double lo_x = std::min(a.x(), b.x()) - radius;
    const double hi_x = std::max(a.x(), b.x()) + radius;
    const double lo_y = std::min(a.y(), b.y()) - radius;
    const double hi_y = std::max(a.y(), b.y()) + radius;
    const int u0 = std::max(0, static_cast<int>(std::floor((lo_x - raster.origin.x()) / raster.cell_width)));
    const int u1 = std::min(raster.width - 1, static_cast<int>(std::floor((hi_x - raster.origin.x()) / raster.cell_width)));
    const int v0 = std::max(0, static_cast<int>(std::floor((lo_y - raster.origin.y()) / raster.cell_length)));
    const int v1 = std::min(raster.height - 1, static_cast<int>(std::floor((hi_y - raster.origin.y()) / raster.cell_length)));
    for (int v = v0; v <= v1; ++v) {
      for (int u = u0; u <= u1; ++u) {
        const int idx = raster.index(u, v);
        if (hit[idx]) continue;
        if (segment_rect_distance(a, b, raster.cell_rect(u, v)) <= radius) hit[idx] = 1;
      }
    }
  }
  std::vector<int> out;
  for (size_t k = 0; k < hit.size(); ++k) {
    if (hit[k]) out.push_back(static_cast<int>(k));
  }
  return out;
}

ObservationRaster rasterize_observations(const Scene& scene, const GridConfig& grid,
                                         const NoiseConfig& noise, std::uint64_t seed,
                                         int upsample) {
  noise.validate();
  Rng rng(seed * 0xD1B54A32D192ED03ULL + 0x8BB84B93962EACC9ULL);
  ObservationRaster raster = make_raster(grid, upsample);

  std::vector<char> painted(raster.evidence.size(), 0);
  for (const Lane3D& lane : scene.lanes) {
    Polyline jittered = lane.points;
    if (noise.jitter_m > 0.0) {
      for (Vec3& p : jittered) {
        p.x() += rng.normal(0.0, noise.jitter_m);
        p.y() += rng.normal(0.0, noise.jitter_m);
      }
    }
    for (int idx : cells_near_polyline(raster, jittered, noise.paint_radius)) painted[idx] = 1;
  }
  for (size_t k = 0; k < painted.size(); ++k) {
    if (!painted[k]) continue;
    raster.evidence[k] = rng.bernoulli(noise.dropout) ? 0.0f : 1.0f;
  }

  const int occlusions = noise.max_occlusions > 0 ? rng.uniform_int(0, noise.max_occlusions) : 0;
  for (int o = 0; o < occlusions; ++o) {
    const double w = rng.uniform(noise.occlusion_min_width, noise.occlusion_max_width);
    const double l = rng.uniform(noise.occlusion_min_length, noise.occlusion_max_length);
    const double cx = rng.uniform(grid.x_min(), grid.x_max());
    const double cy = rng.uniform(grid.y_min() + 5.0, grid.y_max());
    const Rect box{cx - 0.5 * w, cy - 0.5 * l, cx + 0.5 * w, cy + 0.5 * l};
    for (int v = 0; v < raster.height; ++v) {
      for (int u = 0; u < raster.width; ++u) {
        const Rect c = raster.cell_rect(u, v);
        const Vec2 mid(0.5 * (c.x0 + c.x1), 0.5 * (c.y0 + c.y1));
        if (box.contains(mid)) raster.evidence[raster.index(u, v)] = 0.0f;
      }
    }
  }

  if (noise.clutter > 0.0) {
    for (size_t k = 0; k < raster.evidence.size(); ++k) {
      if (raster.evidence[k] == 0.0f && rng.bernoulli(noise.clutter)) {
        raster.evidence[k] = static_cast<float>(rng.uniform(0.3, 1.0));
      }
    }
  }

  for (int v = 0; v < raster.height; ++v) {
    for (int u = 0; u < raster.width; ++u) {
      const Rect c = raster.cell_rect(u, v);
      double h = scene.surface.height(0.5 * (c.x0 + c.x1), 0.5 * (c.y0 + c.y1));
      if (noise.height_noise > 0.0) h += rng.normal(0.0, noise.height_noise);
      raster.heights[raster.index(u, v)] = static_cast<float>(h);
    }
  }
  return raster;
}

}  // namespace tilelane
