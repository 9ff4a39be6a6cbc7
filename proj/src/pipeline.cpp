#include "tilelane/pipeline.hpp"

#include <stdexcept>

namespace tilelane {

SceneSample make_sample(const ExperimentConfig& cfg, std::uint64_t seed) {
  SceneSample s;
  s.scene = generate_scene(cfg.scene, cfg.grid, seed);
  s.raster = rasterize_observations(s.scene, cfg.grid, cfg.noise, seed, cfg.model.upsample);
  return s;
}

std::vector<SceneSample> make_samples(const ExperimentConfig& cfg, std::uint64_t seed_base, int count) {
  std::vector<SceneSample> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) out.push_back(make_sample(cfg, seed_base + static_cast<std::uint64_t>(k)));
  return out;
}

PredictionGrid predict(const ToyPredictor& model, const ObservationRaster& raster, const GridConfig& grid) {
  const ForwardCache cache = forward(model, tile_features(raster, grid, model.config));
  return to_predictions(cache.output, grid, model.config);
}

std::vector<LaneDetection> detect_lanes(const std::vector<DecodedTile>& tiles, const ExperimentConfig& cfg,
                                        ClusterMethod method) {
  if (tiles.empty()) return {};
  std::vector<std::vector<int>> groups;
  if (method == ClusterMethod::kEmbedding) {
    groups = cluster_tiles(tiles, cfg.loss.delta_push);
  } else {
    GreedyOptions opts;
    opts.segment_length = cfg.grid.tile_length;
    groups = greedy_cluster(tiles, opts);
  }
  std::vector<LaneDetection> out;
  for (const auto& g : groups) {
    try {
      out.push_back(order_points(tiles, g));
    } catch (const std::invalid_argument&) {
      // Coincident members carry no curve.
    }
  }
  return out;
}

SceneDetections detect_scene(const PredictionGrid& preds, const Scene& scene, const ExperimentConfig& cfg,
                             ClusterMethod method, const std::optional<TemperatureParams>& temperature) {
  std::vector<DecodedTile> tiles = decode_tiles(preds, scene.pose, cfg.eval.score_threshold);
  if (temperature) {
    for (DecodedTile& t : tiles) rescale_variances(t, temperature->t, scene.pose);
  }
  SceneDetections out;
  out.seed = scene.seed;
  out.pose = scene.pose;
  out.lanes = detect_lanes(tiles, cfg, method);
  return out;
}

SceneDetections infer_scene(const ToyPredictor& model, const SceneSample& sample, const ExperimentConfig& cfg,
                            ClusterMethod method, const std::optional<TemperatureParams>& temperature) {
  return detect_scene(predict(model, sample.raster, cfg.grid), sample.scene, cfg, method, temperature);
}

std::vector<SERecord> collect_se(const ToyPredictor& model, const std::vector<SceneSample>& samples,
                                 const ExperimentConfig& cfg, UncertaintySupervision supervision) {
  std::vector<SERecord> out;
  const AssociationOptions assoc{cfg.eval.assoc_distance, cfg.eval.se_iou};
  for (const SceneSample& s : samples) {
    const PredictionGrid preds = predict(model, s.raster, cfg.grid);
    std::vector<SERecord> recs;
    if (supervision == UncertaintySupervision::kGlobal) {
      const SceneDetections dets = detect_scene(preds, s.scene, cfg, ClusterMethod::kEmbedding, std::nullopt);
      recs = global_se(dets.lanes, s.scene, cfg.grid, assoc);
    } else {
      recs = tile_local_se(preds, encode_targets(s.scene, cfg.grid, cfg.model.n_bins));
    }
    out.insert(out.end(), recs.begin(), recs.end());
  }
  return out;
}

namespace {

std::vector<ScoredCurve> scored_curves(const SceneDetections& dets) {
  std::vector<ScoredCurve> out;
  for (const LaneDetection& d : dets.lanes) out.push_back({d.road_polyline(), d.score});
  return out;
}

std::vector<Polyline> gt_curves(const Scene& scene) {
  std::vector<Polyline> out;
  for (const Lane3D& l : scene.lanes) out.push_back(l.points);
  return out;
}

}  // namespace

std::vector<CalibrationRecord> calibration_records(const SceneDetections& dets, const Scene& gt,
                                                   const ExperimentConfig& cfg) {
  std::vector<CalibrationRecord> out;
  const std::vector<Polyline> gts = gt_curves(gt);
  const Matching m = associate(scored_curves(dets), gts, cfg.eval.assoc_distance, cfg.eval.se_iou);
  for (const auto& pair : m.pairs) {
    for (const LanePoint& p : dets.lanes[pair.detection].points) {
      Eigen::SelfAdjointEigenSolver<Mat3> eig(p.covariance, Eigen::EigenvaluesOnly);
      const double d = nearest_on_polyline(gts[pair.gt], p.road_point.head<2>()).distance;
      out.push_back({eig.eigenvalues().maxCoeff(), d * d});
    }
  }
  return out;
}

Evaluation evaluate(const std::vector<SceneDetections>& dets, const std::vector<SceneSample>& gt,
                    const ExperimentConfig& cfg) {
  if (dets.size() != gt.size()) {
    throw std::invalid_argument("evaluate: " + std::to_string(dets.size()) + " detection scenes for " +
                                std::to_string(gt.size()) + " ground-truth scenes");
  }
  std::vector<SceneCurves> curves;
  std::vector<MatchedCurve> matched;
  std::vector<CalibrationRecord> cal;
  for (size_t k = 0; k < dets.size(); ++k) {
    if (dets[k].seed != gt[k].scene.seed) {
      throw std::invalid_argument("evaluate: scene " + std::to_string(k) + " seed mismatch");
    }
    SceneCurves sc{scored_curves(dets[k]), gt_curves(gt[k].scene)};
    const Matching m = associate(sc.detections, sc.gts, cfg.eval.assoc_distance, cfg.eval.se_iou);
    for (const auto& pair : m.pairs) matched.push_back({sc.detections[pair.detection].line, sc.gts[pair.gt]});
    const auto recs = calibration_records(dets[k], gt[k].scene, cfg);
    cal.insert(cal.end(), recs.begin(), recs.end());
    curves.push_back(std::move(sc));
  }
  Evaluation ev;
  ev.report = average_precision(curves, cfg.eval.iou_thresholds, cfg.eval.assoc_distance);
  ev.report.lateral = lateral_errors(matched);
  ev.n_calibration_records = static_cast<int>(cal.size());
  if (cal.size() >= static_cast<size_t>(cfg.eval.ence_bins)) ev.calibration = ence(cal, cfg.eval.ence_bins);
  return ev;
}

}  // namespace tilelane
