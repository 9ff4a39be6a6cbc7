#pragma once

// Lane-level detection metrics and the uncertainty calibration diagnostic.
// All distances are measured in the BEV plane of the road frame.

#include "tilelane/polyline.hpp"

#include <optional>
#include <vector>

namespace tilelane {

inline constexpr double kResampleStep = 0.5;  // m

/// Fraction of the longer curve covered by predicted sections within
/// `dist_threshold` of the ground truth.
double curve_iou(const Polyline& pred, const Polyline& gt, double dist_threshold);

struct ScoredCurve {
  Polyline line;
  double score = 0.0;
};

struct Matching {
  struct Pair {
    int detection;
    int gt;
    double iou;
  };
  std::vector<Pair> pairs;
  std::vector<int> false_positives;  // detection indices
  std::vector<int> misses;           // gt indices
};

/// Greedy one-to-one matching in descending detection score (ties by index).
Matching associate(const std::vector<ScoredCurve>& detections, const std::vector<Polyline>& gts,
                   double dist_threshold, double iou_threshold);

/// Detections and ground truth of one scene.
struct SceneCurves {
  std::vector<ScoredCurve> detections;
  std::vector<Polyline> gts;
};

struct ThresholdResult {
  double iou_threshold = 0.0;
  double ap = 0.0;
  double recall = 0.0;     // with every detection kept
  double precision = 0.0;  // with every detection kept
  int tp = 0;
  int fp = 0;
  int fn = 0;
};

struct LateralErrors {
  std::optional<double> near;  // y in [0, 30)
  std::optional<double> far;   // y in [30, 80]
  std::optional<double> dz_near;
  std::optional<double> dz_far;
  int n_near = 0;
  int n_far = 0;
};

struct EvalReport {
  double ap = 0.0;
  double ap50 = 0.0;
  double ap90 = 0.0;
  std::vector<ThresholdResult> thresholds;
  LateralErrors lateral;
  int n_detections = 0;
  int n_gt = 0;
};

std::vector<double> default_iou_thresholds();

/// Precision-recall AP pooled over scenes, averaged over IOU thresholds.
/// Throws std::invalid_argument when there is no ground truth at all.
EvalReport average_precision(const std::vector<SceneCurves>& scenes,
                             const std::vector<double>& iou_thresholds, double dist_threshold);

/// Area under the all-point interpolated precision envelope for
/// detections sorted by descending score (flags in that order). Detections
/// with equal scores form one cutoff.
double interpolated_ap(const std::vector<double>& sorted_scores, const std::vector<char>& sorted_tp,
                       int n_gt);

struct MatchedCurve {
  Polyline detection;
  Polyline gt;
};

/// Mean absolute BEV distance from detected points to the matched ground
/// truth, binned by the point's longitudinal coordinate.
LateralErrors lateral_errors(const std::vector<MatchedCurve>& pairs);

struct CalibrationRecord {
  double variance = 0.0;
  double squared_error = 0.0;
};

struct CalibrationBin {
  double rmv = 0.0;
  double rmse = 0.0;
  int count = 0;
};

struct CalibrationReport {
  std::vector<CalibrationBin> bins;
  double ence = 0.0;
};

/// Equal-count bins over records sorted by variance.
CalibrationReport ence(std::vector<CalibrationRecord> records, int n_bins = 10);

}  // namespace tilelane
