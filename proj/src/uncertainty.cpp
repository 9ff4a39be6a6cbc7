#include "tilelane/uncertainty.hpp"

#include "tilelane/evaluation.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tilelane {

std::vector<SERecord> lane_se(const LaneDetection& detection, const Lane3D& lane,
                              const GridConfig& grid, const TileFitOptions& fit) {
  std::vector<SERecord> out;
  for (const LanePoint& p : detection.points) {
    const Vec2 center = tile_center(grid, p.i, p.j);
    SegmentFit ref;
    if (auto f = fit_lane_in_tile(lane.points, grid, p.i, p.j, fit)) {
      ref = *f;
    } else {
      ref = nearest_segment_params(lane.points, center);
    }
    SERecord rec;
    rec.tile = grid.flat(p.i, p.j);
    rec.se = {std::pow(p.r - ref.r, 2), std::pow(wrap_angle(p.phi - ref.phi), 2),
              std::pow(p.dz - ref.dz, 2)};
    rec.variance = p.variance;
    rec.gt_lane = lane.id;
    out.push_back(rec);
  }
  return out;
}

std::vector<SERecord> global_se(const std::vector<LaneDetection>& detections, const Scene& gt,
                                const GridConfig& grid, const AssociationOptions& assoc,
                                const TileFitOptions& fit) {
  std::vector<SERecord> out;
  if (gt.lanes.empty()) return out;
  std::vector<ScoredCurve> curves;
  for (const LaneDetection& d : detections) curves.push_back({d.road_polyline(), d.score});
  std::vector<Polyline> gts;
  for (const Lane3D& l : gt.lanes) gts.push_back(l.points);
  const Matching m = associate(curves, gts, assoc.dist_threshold, assoc.iou_threshold);

  for (const auto& pair : m.pairs) {
    const auto recs = lane_se(detections[pair.detection], gt.lanes[pair.gt], grid, fit);
    out.insert(out.end(), recs.begin(), recs.end());
  }
  return out;
}

std::vector<SERecord> tile_local_se(const PredictionGrid& preds, const TargetGrid& targets) {
  if (preds.tiles.size() != targets.tiles.size()) {
    throw std::invalid_argument("tile_local_se: prediction and target grids differ in size");
  }
  std::vector<SERecord> out;
  for (size_t k = 0; k < targets.tiles.size(); ++k) {
    const TileTarget& t = targets.tiles[k];
    if (!t.occupied) continue;
    const TilePrediction& p = preds.tiles[k];
    SERecord rec;
    rec.tile = static_cast<int>(k);
    rec.se = {std::pow(p.r - t.r, 2), std::pow(wrap_angle(p.phi() - t.phi), 2),
              std::pow(p.dz - t.dz, 2)};
    for (int q = 0; q < 3; ++q) rec.variance[q] = std::exp(p.log_var[q]);
    rec.gt_lane = t.lane_id;
    out.push_back(rec);
  }
  return out;
}

TemperatureParams fit_temperature(const std::vector<SERecord>& records) {
  static const char* kNames[3] = {"r", "phi", "dz"};
  if (records.empty()) throw std::invalid_argument("fit_temperature: no records");
  TemperatureParams out;
  for (int q = 0; q < 3; ++q) {
    double sum = 0.0;
    for (const SERecord& r : records) {
      if (r.se[q] < 0.0 || r.variance[q] < 0.0) {
        throw std::invalid_argument("fit_temperature: negative error or variance");
      }
      if (r.variance[q] == 0.0) {
        if (r.se[q] > 0.0) {
          throw std::invalid_argument(std::string("fit_temperature: zero variance with nonzero error on ") +
                                      kNames[q] + " (infinite NLL)");
        }
        continue;
      }
      sum += r.se[q] / r.variance[q];
    }
    const double t = sum / static_cast<double>(records.size());
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw std::invalid_argument(std::string("fit_temperature: no positive temperature for ") + kNames[q] +
                                  " (all errors zero)");
    }
    out.t[q] = t;
  }
  return out;
}

double mean_nll(const std::vector<SERecord>& records, const TemperatureParams& temperature) {
  if (records.empty()) return 0.0;
  double total = 0.0;
  for (const SERecord& r : records) {
    for (int q = 0; q < 3; ++q) {
      const double v = temperature.t[q] * r.variance[q];
      total += 0.5 * std::log(v) + 0.5 * r.se[q] / v;
    }
  }
  return total / static_cast<double>(3 * records.size());
}

}  // namespace tilelane
