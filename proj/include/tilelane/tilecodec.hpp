#pragma once

#include "tilelane/geometry.hpp"
#include "tilelane/polyline.hpp"
#include "tilelane/scenegen.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace tilelane {

/// Soft-binned angle supervision over n bins centered at 2*pi*i/n.
struct AngleEncoding {
  std::vector<double> probs;
  std::vector<double> residuals;   // wrap(phi - center_i), every bin
  std::vector<std::uint8_t> mask;  // nearest bin and its two neighbours
};

double bin_center(int bin, int n_bins);
double bin_width(int n_bins);
int nearest_bin(double phi, int n_bins);

AngleEncoding angle_targets(double phi, int n_bins);

struct TileTarget {
  bool occupied = false;
  double r = 0.0;
  double phi = 0.0;
  double dz = 0.0;
  AngleEncoding angle;
  int lane_id = -1;
};

struct TargetGrid {
  GridConfig grid;
  int n_bins = 16;
  std::vector<TileTarget> tiles;  // row-major (j, i)

  const TileTarget& at(int i, int j) const { return tiles[grid.flat(i, j)]; }
};

struct TileFitOptions {
  int min_points = 2;
  double min_clip_length = 0.25;  // m of lane inside the tile
  // Reject tiles whose perpendicular foot falls beyond an end of the lane,
  // as happens where a lane starts or stops inside the tile.
  bool foot_on_lane = true;
};

/// Straight-line fit of the part of a lane inside one tile.
struct SegmentFit {
  double r = 0.0;
  double phi = 0.0;
  double dz = 0.0;
  Vec2 centroid{0.0, 0.0};
  double clipped_length = 0.0;
};

/// Length-weighted total least squares over the clipped pieces; phi follows
/// the travel direction of the pieces, r is the signed distance of the line
/// from `center` along (-sin phi, cos phi), dz is the fitted height at the
/// perpendicular foot.
std::optional<SegmentFit> fit_clipped_pieces(const std::vector<Polyline>& pieces,
                                             const Vec2& center, const TileFitOptions& opts);

std::optional<SegmentFit> fit_lane_in_tile(const Polyline& lane, const GridConfig& grid, int i,
                                           int j, const TileFitOptions& opts);

/// Line parameters of the lane segment nearest to `center`, for tiles the
/// lane does not cross.
SegmentFit nearest_segment_params(const Polyline& lane, const Vec2& center);

/// Lanes in the scene are already expressed in the road frame, so the pose
/// only enters when points are lifted back to the camera frame.
TargetGrid encode_targets(const Scene& scene, const GridConfig& grid, int n_bins,
                          const TileFitOptions& opts = {});

struct TilePrediction {
  double score_logit = 0.0;
  double r = 0.0;
  double dz = 0.0;
  std::vector<double> bin_logits;
  std::vector<double> residuals;
  std::vector<double> embedding;
  std::array<double, 3> log_var{0.0, 0.0, 0.0};  // r, phi, dz

  double score() const;
  int best_bin() const;
  double phi() const;  // wrapped
};

struct PredictionGrid {
  GridConfig grid;
  std::vector<TilePrediction> tiles;  // row-major (j, i)

  const TilePrediction& at(int i, int j) const { return tiles[grid.flat(i, j)]; }
};

/// Predictions that reproduce the targets exactly (score 1 on occupied tiles,
/// near-zero variance). Embeddings are one-hot-ish per lane id scaled by
/// `embedding_spacing`.
PredictionGrid perfect_predictions(const TargetGrid& targets, int embedding_dim = 4,
                                   double embedding_spacing = 10.0);

struct DecodedTile {
  int i = 0;
  int j = 0;
  Vec2 center{0.0, 0.0};
  double r = 0.0;
  double phi = 0.0;
  double dz = 0.0;
  std::array<double, 3> variance{0.0, 0.0, 0.0};  // r, phi, dz
  Vec3 road_point;  // (x, y, dz) in the road frame
  Vec3 point;       // camera frame
  Vec3 direction;   // camera frame, unit
  Covariance3 covariance = Covariance3::Zero();
  double score = 0.0;
  std::vector<double> embedding;
};

std::vector<DecodedTile> decode_tiles(const PredictionGrid& preds, const CameraPose& pose,
                                      double score_threshold);

/// Recomputes a decoded tile's covariance with the polar variances scaled.
void rescale_variances(DecodedTile& tile, const std::array<double, 3>& temperature,
                       const CameraPose& pose);

}  // namespace tilelane
