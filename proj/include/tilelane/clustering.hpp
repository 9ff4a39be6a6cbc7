#pragma once

// Grouping of decoded tiles into lane instances.

#include "tilelane/polyline.hpp"
#include "tilelane/tilecodec.hpp"

#include <vector>

namespace tilelane {

struct LanePoint {
  int i = 0;
  int j = 0;
  double r = 0.0;
  double phi = 0.0;  // as predicted, before any flip
  double dz = 0.0;
  std::array<double, 3> variance{0.0, 0.0, 0.0};
  Vec3 road_point;
  Vec3 point;      // camera frame
  Vec3 direction;  // camera frame, consistent along the chain
  Covariance3 covariance = Covariance3::Zero();
  double score = 0.0;
};

struct LaneDetection {
  std::vector<LanePoint> points;  // ordered
  double score = 0.0;             // mean member tile score
  std::vector<int> members;       // indices into the decoded tile list, point order

  /// Road-frame polyline through the ordered points.
  Polyline road_polyline() const;
};

struct MeanShiftOptions {
  int max_iters = 100;
  double tol = 1e-6;
};

/// Flat-kernel mean-shift started from every point. Converged modes closer
/// than bandwidth / 2 are merged, keeping the mode with the larger support.
std::vector<Eigen::VectorXd> mean_shift(const std::vector<Eigen::VectorXd>& points, double bandwidth,
                                        const MeanShiftOptions& opts = {});

/// Tile index groups. Tiles farther than delta_push / 2 from every mode are
/// dropped, as are groups smaller than `min_members`.
std::vector<std::vector<int>> cluster_tiles(const std::vector<DecodedTile>& tiles, double delta_push,
                                            int min_members = 2);

struct GreedyOptions {
  double segment_length = 3.0;  // m, also the endpoint gap limit
  double max_angle = 30.0 * kPi / 180.0;
  int min_members = 2;
};

/// Chains tiles from the highest-scoring seed by endpoint continuity and
/// direction similarity.
std::vector<std::vector<int>> greedy_cluster(const std::vector<DecodedTile>& tiles,
                                             const GreedyOptions& opts);

/// Orders one cluster into a chain. Throws std::invalid_argument for fewer
/// than two points or coincident points.
LaneDetection order_points(const std::vector<DecodedTile>& tiles, const std::vector<int>& members);

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace tilelane
