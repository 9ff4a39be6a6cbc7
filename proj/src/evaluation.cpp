#include "tilelane/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tilelane {

double curve_iou(const Polyline& pred, const Polyline& gt, double dist_threshold) {
  if (!(dist_threshold > 0.0)) throw std::invalid_argument("curve_iou: threshold must be > 0");
  if (pred.size() < 2 || gt.size() < 2) throw std::invalid_argument("curve_iou: degenerate polyline");
  const double lp = polyline_length(pred);
  const double lg = polyline_length(gt);
  if (lp <= 0.0 || lg <= 0.0) throw std::invalid_argument("curve_iou: zero-length polyline");
  double inter = 0.0;
  for (const ArcSample& s : resample_midpoints(pred, kResampleStep)) {
    if (nearest_on_polyline(gt, s.point.head<2>()).distance < dist_threshold) inter += s.weight;
  }
  return std::clamp(inter / std::max(lp, lg), 0.0, 1.0);
}

namespace {

std::vector<int> score_order(const std::vector<ScoredCurve>& dets) {
  std::vector<int> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return dets[a].score > dets[b].score; });
  return order;
}

}  // namespace

Matching associate(const std::vector<ScoredCurve>& detections, const std::vector<Polyline>& gts,
                   double dist_threshold, double iou_threshold) {
  if (!(dist_threshold > 0.0) || !(iou_threshold > 0.0)) {
    throw std::invalid_argument("associate: thresholds must be > 0");
  }
  Matching m;
  std::vector<char> taken(gts.size(), 0);
  for (int d : score_order(detections)) {
    int best = -1;
    double best_iou = iou_threshold;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double iou = curve_iou(detections[d].line, gts[g], dist_threshold);
      if (iou >= best_iou && (best < 0 || iou > best_iou)) {
        best_iou = iou;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) {
      taken[best] = 1;
      m.pairs.push_back({d, best, best_iou});
    } else {
      m.false_positives.push_back(d);
    }
  }
  for (size_t g = 0; g < gts.size(); ++g) {
    if (!taken[g]) m.misses.push_back(static_cast<int>(g));
  }
  return m;
}

std::vector<double> default_iou_thresholds() {
  std::vector<double> t;
  for (int k = 1; k <= 9; ++k) t.push_back(k / 10.0);
  return t;
}

double interpolated_ap(const std::vector<double>& sorted_scores, const std::vector<char>& sorted_tp,
                       int n_gt) {
  if (n_gt <= 0) throw std::invalid_argument("interpolated_ap: no ground truth");
  std::vector<double> recall, precision;
  int tp = 0;
  const size_t n = sorted_scores.size();
  for (size_t k = 0; k < n; ++k) {
    tp += sorted_tp[k] ? 1 : 0;
    if (k + 1 < n && sorted_scores[k + 1] == sorted_scores[k]) continue;
    recall.push_back(static_cast<double>(tp) / n_gt);
    precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
  }
  for (size_t k = precision.size(); k-- > 1;) {
    precision[k - 1] = std::max(precision[k - 1], precision[k]);
  }
  double ap = 0.0;
  double prev = 0.0;
  for (size_t k = 0; k < recall.size(); ++k) {
    ap += (recall[k] - prev) * precision[k];
    prev = recall[k];
  }
  return ap;
}

EvalReport average_precision(const std::vector<SceneCurves>& scenes,
                             const std::vector<double>& iou_thresholds, double dist_threshold) {
  EvalReport report;
  for (const SceneCurves& s : scenes) {
    report.n_gt += static_cast<int>(s.gts.size());
    report.n_detections += static_cast<int>(s.detections.size());
  }
  if (report.n_gt == 0) throw std::invalid_argument("average_precision: no ground-truth lanes");
  if (iou_thresholds.empty()) throw std::invalid_argument("average_precision: no IOU thresholds");

  struct Flagged {
    double score;
    size_t scene;
    int det;
  };
  std::vector<Flagged> all;
  for (size_t s = 0; s < scenes.size(); ++s) {
    for (size_t d = 0; d < scenes[s].detections.size(); ++d) {
      all.push_back({scenes[s].detections[d].score, s, static_cast<int>(d)});
    }
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const Flagged& a, const Flagged& b) { return a.score > b.score; });

  for (double thr : iou_thresholds) {
    std::vector<std::vector<char>> is_tp(scenes.size());
    ThresholdResult res;
    res.iou_threshold = thr;
    for (size_t s = 0; s < scenes.size(); ++s) {
      is_tp[s].assign(scenes[s].detections.size(), 0);
      const Matching m = associate(scenes[s].detections, scenes[s].gts, dist_threshold, thr);
      for (const auto& p : m.pairs) is_tp[s][p.detection] = 1;
      res.tp += static_cast<int>(m.pairs.size());
      res.fp += static_cast<int>(m.false_positives.size());
      res.fn += static_cast<int>(m.misses.size());
    }
    std::vector<double> scores;
    std::vector<char> flags;
    for (const Flagged& f : all) {
      scores.push_back(f.score);
      flags.push_back(is_tp[f.scene][f.det]);
    }
    res.ap = interpolated_ap(scores, flags, report.n_gt);
    res.recall = static_cast<double>(res.tp) / report.n_gt;
    res.precision = res.tp + res.fp > 0 ? static_cast<double>(res.tp) / (res.tp + res.fp) : 0.0;
    report.ap += res.ap;
    if (std::abs(thr - 0.5) < 1e-9) report.ap50 = res.ap;
    if (std::abs(thr - 0.9) < 1e-9) report.ap90 = res.ap;
    report.thresholds.push_back(res);
  }
  report.ap /= static_cast<double>(iou_thresholds.size());
  return report;
}

LateralErrors lateral_errors(const std::vector<MatchedCurve>& pairs) {
  double near = 0.0, far = 0.0, dz_near = 0.0, dz_far = 0.0;
  LateralErrors out;
  for (const MatchedCurve& m : pairs) {
    if (m.gt.size() < 2) throw std::invalid_argument("lateral_errors: degenerate ground truth");
    for (const Vec3& p : m.detection) {
      const double y = p.y();
      if (y < 0.0 || y > 80.0) continue;
      const NearestPoint np = nearest_on_polyline(m.gt, p.head<2>());
      const double dz = std::abs(p.z() - np.point.z());
      if (y < 30.0) {
        near += np.distance;
        dz_near += dz;
        ++out.n_near;
      } else {
        far += np.distance;
        dz_far += dz;
        ++out.n_far;
      }
    }
  }
  if (out.n_near > 0) {
    out.near = near / out.n_near;
    out.dz_near = dz_near / out.n_near;
  }
  if (out.n_far > 0) {
    out.far = far / out.n_far;
    out.dz_far = dz_far / out.n_far;
  }
  return out;
}

CalibrationReport ence(std::vector<CalibrationRecord> records, int n_bins) {
  if (n_bins < 1) throw std::invalid_argument("ence: need at least one bin");
  const size_t n = records.size();
  if (n < static_cast<size_t>(n_bins)) {
    throw std::invalid_argument("ence: " + std::to_string(n) + " records for " +
                                std::to_string(n_bins) + " bins");
  }
  std::sort(records.begin(), records.end(), [](const CalibrationRecord& a, const CalibrationRecord& b) {
    if (a.variance != b.variance) return a.variance < b.variance;
    return a.squared_error < b.squared_error;
  });
  CalibrationReport rep;
  for (int b = 0; b < n_bins; ++b) {
    const size_t lo = n * b / n_bins;
    const size_t hi = n * (b + 1) / n_bins;
    double var = 0.0, se = 0.0;
    for (size_t k = lo; k < hi; ++k) {
      var += records[k].variance;
      se += records[k].squared_error;
    }
    CalibrationBin bin;
    bin.count = static_cast<int>(hi - lo);
    bin.rmv = std::sqrt(var / bin.count);
    bin.rmse = std::sqrt(se / bin.count);
    if (bin.rmv <= 0.0) throw std::invalid_argument("ence: bin " + std::to_string(b) + " has zero RMV");
    rep.ence += std::abs(bin.rmv - bin.rmse) / bin.rmv;
    rep.bins.push_back(bin);
  }
  rep.ence /= n_bins;
  return rep;
}

}  // namespace tilelane
