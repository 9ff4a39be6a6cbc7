#pragma once

// File formats: JSON-Lines datasets, JSON checkpoints, detections and
// reports. Numeric arrays are stored as base64 little-endian blocks.

#include "tilelane/clustering.hpp"
#include "tilelane/config.hpp"
#include "tilelane/model.hpp"
#include "tilelane/scenegen.hpp"
#include "tilelane/uncertainty.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tilelane {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SceneSample {
  Scene scene;
  ObservationRaster raster;
};

/// Seeds [lo, hi] covered by a set of scenes; empty sets give lo > hi.
struct SeedRange {
  std::uint64_t lo = 1;
  std::uint64_t hi = 0;
  bool empty() const { return lo > hi; }
  bool overlaps(const SeedRange& o) const { return !empty() && !o.empty() && lo <= o.hi && o.lo <= hi; }
};

struct Dataset {
  std::vector<SceneSample> samples;
  std::string config_hash;
  GridConfig grid;
  SeedRange seeds() const;
};

nlohmann::json meta_json(const std::string& config_hash, const GridConfig& grid);
nlohmann::json grid_to_json(const GridConfig& grid);
GridConfig grid_from_json(const nlohmann::json& j);
bool same_grid(const GridConfig& a, const GridConfig& b);

nlohmann::json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);
nlohmann::json raster_to_json(const ObservationRaster& raster);
ObservationRaster raster_from_json(const nlohmann::json& j);

void write_dataset(const std::string& path, const std::vector<SceneSample>& samples,
                   const std::string& config_hash, const GridConfig& grid);
Dataset read_dataset(const std::string& path);

inline constexpr int kCheckpointVersion = 1;

enum class CheckpointStage { kMeans, kUncertainty };
std::string to_string(CheckpointStage s);

struct Checkpoint {
  int version = kCheckpointVersion;
  ExperimentConfig config;
  ToyPredictor model;
  CheckpointStage stage = CheckpointStage::kMeans;
  std::uint64_t seed = 0;
  SeedRange train_seeds;
  UncertaintySupervision supervision = UncertaintySupervision::kGlobal;
};

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

struct SceneDetections {
  std::uint64_t seed = 0;
  CameraPose pose;
  std::vector<LaneDetection> lanes;
};

struct DetectionSet {
  std::string config_hash;
  ClusterMethod method = ClusterMethod::kEmbedding;
  UncertaintySupervision supervision = UncertaintySupervision::kGlobal;
  GridConfig grid;
  std::optional<TemperatureParams> temperature;
  std::vector<SceneDetections> scenes;
};

nlohmann::json detections_to_json(const DetectionSet& set);
DetectionSet detections_from_json(const nlohmann::json& j);

nlohmann::json read_json(const std::string& path);
/// Writes `j.dump(indent)` followed by a newline.
void write_json(const std::string& path, const nlohmann::json& j, int indent = 1);

}  // namespace tilelane
