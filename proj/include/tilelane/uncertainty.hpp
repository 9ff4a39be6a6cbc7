#pragma once

// Squared-error supervision for the variance heads and temperature scaling.

#include "tilelane/clustering.hpp"
#include "tilelane/scenegen.hpp"
#include "tilelane/tilecodec.hpp"

#include <array>
#include <vector>

namespace tilelane {

struct SERecord {
  int tile = 0;                              // flat tile index
  std::array<double, 3> se{0.0, 0.0, 0.0};   // r (m^2), phi (rad^2), dz (m^2)
  std::array<double, 3> variance{0.0, 0.0, 0.0};
  int gt_lane = -1;
};

struct AssociationOptions {
  double dist_threshold = 1.0;  // m
  double iou_threshold = 0.5;
};

/// Errors of every point of `detection` against the whole of `lane`: the
/// lane's own fit where it crosses the tile, else its nearest segment.
std::vector<SERecord> lane_se(const LaneDetection& detection, const Lane3D& lane,
                              const GridConfig& grid, const TileFitOptions& fit = {});

/// Errors of every member tile of each associated detection, measured
/// against the matched ground-truth lane as a whole.
std::vector<SERecord> global_se(const std::vector<LaneDetection>& detections, const Scene& gt,
                                const GridConfig& grid, const AssociationOptions& assoc,
                                const TileFitOptions& fit = {});

/// Errors of each ground-truth-occupied tile against its own target.
std::vector<SERecord> tile_local_se(const PredictionGrid& preds, const TargetGrid& targets);

struct TemperatureParams {
  std::array<double, 3> t{1.0, 1.0, 1.0};  // r, phi, dz
};

/// Closed-form minimizer of the Gaussian NLL under variance scaling.
/// Records with zero variance and zero error contribute a ratio of 0.
TemperatureParams fit_temperature(const std::vector<SERecord>& records);

/// Mean Gaussian NLL (constant dropped) over records and parameters.
double mean_nll(const std::vector<SERecord>& records, const TemperatureParams& temperature);

}  // namespace tilelane
