#pragma once

#include "tilelane/geometry.hpp"
#include "tilelane/polyline.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace tilelane {

/// Small deterministic sampler. Distribution shapes are computed here rather
/// than with <random> distributions so that generated data does not depend on
/// the standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi);  // inclusive
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  bool bernoulli(double p) { return uniform() < p; }
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

enum class Topology { kParallel, kSplit, kMerge, kShortStart, kPerpendicular, kCurve };

inline constexpr Topology kAllTopologies[] = {Topology::kParallel,   Topology::kSplit,
                                              Topology::kMerge,      Topology::kShortStart,
                                              Topology::kPerpendicular, Topology::kCurve};

std::string_view to_string(Topology t);
Topology topology_from_string(std::string_view name);

struct SurfaceWave {
  double amplitude = 0.0;   // m
  double wavelength = 100;  // m
  double direction = 0.0;   // rad, direction of the wave vector in BEV
  double phase = 0.0;       // rad
};

/// Road height above the projection plane: a sum of planar sinusoids,
/// offset so the height under the camera is zero.
struct Surface {
  std::vector<SurfaceWave> waves;
  double height(double x, double y) const;
};

struct Lane3D {
  int id = 0;
  Polyline points;  // road frame, ~1 m arc-length spacing
};

struct Scene {
  std::uint64_t seed = 0;
  Topology topology = Topology::kParallel;
  CameraPose pose;
  Surface surface;
  std::vector<Lane3D> lanes;
};

struct SceneConfig {
  // Empty means "mixed": the topology cycles with the seed.
  std::optional<Topology> topology;
  int min_lanes = 2;
  int max_lanes = 4;
  double lane_spacing = 3.5;
  double max_heading = 0.03;        // rad, base centerline heading
  double max_quadratic = 1.0e-4;    // 1/m
  double max_cubic = 5.0e-7;        // 1/m^2
  double curve_curvature_min = 0.002;
  double curve_curvature_max = 0.01;
  double split_ramp = 30.0;
  double short_start_min = 20.0;
  double short_start_max = 45.0;
  int surface_waves = 2;
  double max_amplitude = 0.5;
  double min_wavelength = 60.0;
  double max_wavelength = 200.0;
  double pitch_min = 0.0;
  double pitch_max = 0.06;
  double height_min = 1.3;
  double height_max = 1.7;
  double sample_step = 1.0;
  double min_lane_length = 8.0;

  void validate() const;
};

/// Deterministic in (config, grid, seed).
Scene generate_scene(const SceneConfig& config, const GridConfig& grid, std::uint64_t seed);

struct NoiseConfig {
  double paint_radius = 0.15;  // m
  double jitter_m = 0.05;
  double dropout = 0.1;
  int max_occlusions = 2;
  double occlusion_min_width = 1.5;
  double occlusion_max_width = 3.0;
  double occlusion_min_length = 4.0;
  double occlusion_max_length = 10.0;
  double height_noise = 0.03;
  double clutter = 0.003;  // probability a background cell lights up

  void validate() const;
};

/// Fine BEV raster over the grid coverage; cell (u, v) stored at v * width + u.
struct ObservationRaster {
  int width = 0;   // cells, lateral
  int height = 0;  // cells, longitudinal
  double cell_width = 0.0;
  double cell_length = 0.0;
  Vec2 origin{0.0, 0.0};
  std::vector<float> evidence;
  std::vector<float> heights;

  int index(int u, int v) const { return v * width + u; }
  Rect cell_rect(int u, int v) const;
};

ObservationRaster make_raster(const GridConfig& grid, int upsample);

ObservationRaster rasterize_observations(const Scene& scene, const GridConfig& grid,
                                         const NoiseConfig& noise, std::uint64_t seed,
                                         int upsample = 4);

/// Cells within `radius` of the polyline (BEV), in raster index order.
std::vector<int> cells_near_polyline(const ObservationRaster& raster, const Polyline& line,
                                     double radius);

}  // namespace tilelane
