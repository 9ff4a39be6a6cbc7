#pragma once

// Two-stage training: parameter heads and embeddings first, then the
// log-variance head on frozen features.

#include "tilelane/config.hpp"
#include "tilelane/model.hpp"
#include "tilelane/serialization.hpp"

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tilelane {

struct TrainLogEntry {
  std::string stage;
  int step = 0;
  double loss = 0.0;  // mean over the steps since the previous entry
  double lr = 0.0;
};

using TrainLogger = std::function<void(const TrainLogEntry&)>;

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int last_good_step)
      : std::runtime_error(what), last_good_step(last_good_step) {}
  int last_good_step;
};

struct StageResult {
  ToyPredictor model;
  std::vector<double> losses;  // one per step
};

/// Mean loss of one scene (tiles plus weighted embedding term) and its
/// gradient with respect to the network output rows.
struct SceneLoss {
  double tiles = 0.0;
  double embedding = 0.0;
  RowMatrix grad;
};
SceneLoss scene_loss(const RowMatrix& output, const TargetGrid& targets, const ExperimentConfig& cfg);

StageResult train_means(const std::vector<SceneSample>& samples, const ExperimentConfig& cfg,
                        std::uint64_t seed, const TrainLogger& logger = {});

StageResult train_uncertainty(const ToyPredictor& model, const std::vector<SceneSample>& samples,
                              const ExperimentConfig& cfg, UncertaintySupervision supervision,
                              const TrainLogger& logger = {});

}  // namespace tilelane
