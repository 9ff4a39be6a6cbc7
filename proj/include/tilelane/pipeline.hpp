#pragma once

// End-to-end glue: data generation, inference, detection and scoring.

#include "tilelane/clustering.hpp"
#include "tilelane/config.hpp"
#include "tilelane/evaluation.hpp"
#include "tilelane/model.hpp"
#include "tilelane/serialization.hpp"
#include "tilelane/uncertainty.hpp"

#include <optional>
#include <vector>

namespace tilelane {

SceneSample make_sample(const ExperimentConfig& cfg, std::uint64_t seed);
std::vector<SceneSample> make_samples(const ExperimentConfig& cfg, std::uint64_t seed_base, int count);

PredictionGrid predict(const ToyPredictor& model, const ObservationRaster& raster, const GridConfig& grid);

/// Clusters decoded tiles and orders each cluster into a detection.
std::vector<LaneDetection> detect_lanes(const std::vector<DecodedTile>& tiles, const ExperimentConfig& cfg,
                                        ClusterMethod method);

/// Decode, optional variance rescale, cluster.
SceneDetections detect_scene(const PredictionGrid& preds, const Scene& scene, const ExperimentConfig& cfg,
                             ClusterMethod method, const std::optional<TemperatureParams>& temperature);

SceneDetections infer_scene(const ToyPredictor& model, const SceneSample& sample, const ExperimentConfig& cfg,
                            ClusterMethod method, const std::optional<TemperatureParams>& temperature);

/// Squared-error records on a set of scenes for the chosen supervision.
std::vector<SERecord> collect_se(const ToyPredictor& model, const std::vector<SceneSample>& samples,
                                 const ExperimentConfig& cfg, UncertaintySupervision supervision);

/// (max covariance eigenvalue, squared lateral error) for every point of a
/// detection matched at `cfg.eval.se_iou`.
std::vector<CalibrationRecord> calibration_records(const SceneDetections& dets, const Scene& gt,
                                                   const ExperimentConfig& cfg);

struct Evaluation {
  EvalReport report;
  std::optional<CalibrationReport> calibration;
  int n_calibration_records = 0;
};

/// Scenes are paired by position; seeds must agree.
Evaluation evaluate(const std::vector<SceneDetections>& dets, const std::vector<SceneSample>& gt,
                    const ExperimentConfig& cfg);

}  // namespace tilelane
