#pragma once

// Experiment configuration: one JSON document with a section per module.

#include "tilelane/geometry.hpp"
#include "tilelane/model.hpp"
#include "tilelane/scenegen.hpp"

#include <json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tilelane {

inline constexpr const char* kToolVersion = "0.3.0";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LossConfig {
  double delta_pull = 0.1;
  double delta_push = 3.0;
  double embedding_weight = 20.0;
};

enum class UncertaintySupervision { kGlobal, kTileLocal };
std::string to_string(UncertaintySupervision s);

struct TrainConfig {
  int steps_means = 7000;
  int steps_uncertainty = 2000;
  int batch_scenes = 8;
  double lr = 1e-3;
  double lr_uncertainty = 1e-2;
  double decay_fraction = 0.7;  // fraction of steps before the step size drops
  double decay_factor = 0.1;
  double beta1 = 0.0;
  double beta2 = 0.999;
  int log_every = 50;
  UncertaintySupervision supervision = UncertaintySupervision::kGlobal;
};

enum class ClusterMethod { kEmbedding, kGreedy };
std::string to_string(ClusterMethod m);

struct EvalConfig {
  double score_threshold = 0.3;
  double assoc_distance = 1.0;  // m
  std::vector<double> iou_thresholds{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  double se_iou = 0.5;  // IOU needed before a detection supervises or is scored for uncertainty
  int ence_bins = 10;
  ClusterMethod clustering = ClusterMethod::kEmbedding;
};

struct SplitConfig {
  std::uint64_t train_seed = 0;
  int n_train = 500;
  std::uint64_t calib_seed = 100000;
  int n_calib = 100;
  std::uint64_t test_seed = 200000;
  int n_test = 100;
};

struct ExperimentConfig {
  GridConfig grid;
  SceneConfig scene;
  NoiseConfig noise;
  ModelConfig model;
  LossConfig loss;
  TrainConfig train;
  EvalConfig eval;
  SplitConfig splits;

  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);

/// Missing keys keep their defaults; unknown keys raise ConfigError naming
/// the key.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// FNV-1a over the canonical JSON dump.
std::string config_hash(const ExperimentConfig& cfg);
std::uint64_t fnv1a(const std::string& text);

}  // namespace tilelane
