#include "tilelane/tilecodec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace tilelane {

namespace {
constexpr double kFootTolerance = 1e-6;
}  // namespace

double bin_width(int n_bins) { return kTwoPi / n_bins; }

double bin_center(int bin, int n_bins) { return bin_width(n_bins) * bin; }

int nearest_bin(double phi, int n_bins) {
  const double w = bin_width(n_bins);
  double a = std::fmod(phi, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  return static_cast<int>(std::lround(a / w)) % n_bins;
}

AngleEncoding angle_targets(double phi, int n_bins) {
  if (n_bins < 4) throw std::invalid_argument("angle encoding needs at least 4 bins");
  const double w = bin_width(n_bins);
  AngleEncoding enc;
  enc.probs.resize(n_bins);
  enc.residuals.resize(n_bins);
  enc.mask.assign(n_bins, 0);
  for (int i = 0; i < n_bins; ++i) {
    const double d = wrap_angle(phi - bin_center(i, n_bins));
    enc.residuals[i] = d;
    enc.probs[i] = std::max(0.0, 1.0 - std::abs(d) / w);
  }
  const int best = nearest_bin(phi, n_bins);
  enc.mask[best] = 1;
  enc.mask[(best + 1) % n_bins] = 1;
  enc.mask[(best + n_bins - 1) % n_bins] = 1;
  return enc;
}

std::optional<SegmentFit> fit_clipped_pieces(const std::vector<Polyline>& pieces,
                                             const Vec2& center, const TileFitOptions& opts) {
  int n_points = 0;
  double total = 0.0;
  Vec2 first_moment = Vec2::Zero();
  Eigen::Matrix2d second_moment = Eigen::Matrix2d::Zero();
  for (const Polyline& piece : pieces) {
    n_points += static_cast<int>(piece.size());
    for (size_t k = 0; k + 1 < piece.size(); ++k) {
      const Vec2 a = piece[k].head<2>();
      const Vec2 b = piece[k + 1].head<2>();
      const double len = (b - a).norm();
      total += len;
      first_moment += 0.5 * len * (a + b);
      second_moment += len * ((a * a.transpose() + b * b.transpose()) / 3.0 +
                              (a * b.transpose() + b * a.transpose()) / 6.0);
    }
  }
  if (n_points < opts.min_points || total <= 0.0 || total < opts.min_clip_length) {
    return std::nullopt;
  }
  const Vec2 mean = first_moment / total;
  const Eigen::Matrix2d cov = second_moment / total - mean * mean.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  Vec2 dir = eig.eigenvectors().col(1);  // largest eigenvalue

  Vec2 travel = pieces.back().back().head<2>() - pieces.front().front().head<2>();
  if (travel.norm() < 1e-9) {
    travel = pieces.front()[1].head<2>() - pieces.front()[0].head<2>();
  }
  if (dir.dot(travel) < 0.0) dir = -dir;

  SegmentFit fit;
  fit.phi = wrap_angle(std::atan2(dir.y(), dir.x()));
  const Vec2 normal(-std::sin(fit.phi), std::cos(fit.phi));
  fit.r = normal.dot(mean - center);
  fit.centroid = mean;
  fit.clipped_length = total;

  const Vec2 foot = center + fit.r * normal;

  // Height: least squares line z(t) along the direction, evaluated at the foot.
  double st = 0.0, stt = 0.0, sz = 0.0, stz = 0.0;
  for (const Polyline& piece : pieces) {
    for (size_t k = 0; k + 1 < piece.size(); ++k) {
      const double len = (piece[k + 1].head<2>() - piece[k].head<2>()).norm();
      const double ta = dir.dot(piece[k].head<2>() - foot);
      const double tb = dir.dot(piece[k + 1].head<2>() - foot);
      const double za = piece[k].z();
      const double zb = piece[k + 1].z();
      st += len * 0.5 * (ta + tb);
      stt += len * (ta * ta + ta * tb + tb * tb) / 3.0;
      sz += len * 0.5 * (za + zb);
      stz += len * (2.0 * ta * za + ta * zb + tb * za + 2.0 * tb * zb) / 6.0;
    }
  }
  const double mt = st / total;
  const double mz = sz / total;
  const double var_t = stt / total - mt * mt;
  if (var_t > 1e-4) {
    const double slope = (stz / total - mt * mz) / var_t;
    fit.dz = mz - slope * mt;
  } else {
    fit.dz = mz;
  }
  return fit;
}

namespace {

Rect tile_rect(const GridConfig& grid, int i, int j) {
  const double x0 = grid.origin.x() + i * grid.tile_width;
  const double y0 = grid.origin.y() + j * grid.tile_length;
  return {x0, y0, x0 + grid.tile_width, y0 + grid.tile_length};
}

// Tiles whose rectangle may intersect the lane.
std::set<int> candidate_tiles(const Polyline& lane, const GridConfig& grid) {
  std::set<int> out;
  auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
  for (size_t k = 0; k + 1 < lane.size(); ++k) {
    const double lo_x = std::min(lane[k].x(), lane[k + 1].x());
    const double hi_x = std::max(lane[k].x(), lane[k + 1].x());
    const double lo_y = std::min(lane[k].y(), lane[k + 1].y());
    const double hi_y = std::max(lane[k].y(), lane[k + 1].y());
    if (hi_x < grid.x_min() || lo_x > grid.x_max() || hi_y < grid.y_min() || lo_y > grid.y_max()) {
      continue;
    }
    const int i0 = clampi(static_cast<int>(std::floor((lo_x - grid.origin.x()) / grid.tile_width)), grid.width_tiles);
    const int i1 = clampi(static_cast<int>(std::floor((hi_x - grid.origin.x()) / grid.tile_width)), grid.width_tiles);
    const int j0 = clampi(static_cast<int>(std::floor((lo_y - grid.origin.y()) / grid.tile_length)), grid.height_tiles);
    const int j1 = clampi(static_cast<int>(std::floor((hi_y - grid.origin.y()) / grid.tile_length)), grid.height_tiles);
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) out.insert(grid.flat(i, j));
    }
  }
  return out;
}

}  // namespace

std::optional<SegmentFit> fit_lane_in_tile(const Polyline& lane, const GridConfig& grid, int i,
                                           int j, const TileFitOptions& opts) {
  const auto pieces = clip_polyline(lane, tile_rect(grid, i, j));
  if (pieces.empty()) return std::nullopt;
  const Vec2 center = tile_center(grid, i, j);
  auto fit = fit_clipped_pieces(pieces, center, opts);
  if (fit && opts.foot_on_lane) {
    const Vec2 foot = center + fit->r * Vec2(-std::sin(fit->phi), std::cos(fit->phi));
    const NearestPoint np = nearest_on_polyline(lane, foot);
    const bool before_start = np.segment == 0 && np.t <= 0.0;
    const bool past_end = np.segment + 2 == static_cast<int>(lane.size()) && np.t >= 1.0;
    if ((before_start || past_end) && np.distance > kFootTolerance) return std::nullopt;
  }
  return fit;
}

SegmentFit nearest_segment_params(const Polyline& lane, const Vec2& center) {
  if (lane.size() < 2) throw std::invalid_argument("nearest_segment_params: lane needs >= 2 points");
  const NearestPoint np = nearest_on_polyline(lane, center);
  const Vec2 a = lane[np.segment].head<2>();
  const Vec2 b = lane[np.segment + 1].head<2>();
  SegmentFit fit;
  fit.phi = wrap_angle(std::atan2(b.y() - a.y(), b.x() - a.x()));
  const Vec2 normal(-std::sin(fit.phi), std::cos(fit.phi));
  fit.r = normal.dot(a - center);
  fit.centroid = np.point.head<2>();
  fit.dz = np.point.z();
  fit.clipped_length = 0.0;
  return fit;
}

TargetGrid encode_targets(const Scene& scene, const GridConfig& grid, int n_bins,
                          const TileFitOptions& opts) {
  grid.validate();
  TargetGrid out;
  out.grid = grid;
  out.n_bins = n_bins;
  out.tiles.assign(grid.tile_count(), TileTarget{});
  std::vector<double> best_dist(grid.tile_count(), std::numeric_limits<double>::infinity());

  for (const Lane3D& lane : scene.lanes) {
    for (int flat : candidate_tiles(lane.points, grid)) {
      const int i = flat % grid.width_tiles;
      const int j = flat / grid.width_tiles;
      const auto fit = fit_lane_in_tile(lane.points, grid, i, j, opts);
      if (!fit) continue;
      const double d = (fit->centroid - tile_center(grid, i, j)).norm();
      if (d >= best_dist[flat]) continue;
      best_dist[flat] = d;
      TileTarget& t = out.tiles[flat];
      t.occupied = true;
      t.r = fit->r;
      t.phi = fit->phi;
      t.dz = fit->dz;
      t.lane_id = lane.id;
    }
  }
  for (TileTarget& t : out.tiles) {
    if (t.occupied) t.angle = angle_targets(t.phi, n_bins);
  }
  return out;
}

double TilePrediction::score() const { return 1.0 / (1.0 + std::exp(-score_logit)); }

int TilePrediction::best_bin() const {
  return static_cast<int>(std::max_element(bin_logits.begin(), bin_logits.end()) - bin_logits.begin());
}

double TilePrediction::phi() const {
  const int b = best_bin();
  return wrap_angle(bin_center(b, static_cast<int>(bin_logits.size())) + residuals[b]);
}

PredictionGrid perfect_predictions(const TargetGrid& targets, int embedding_dim,
                                   double embedding_spacing) {
  PredictionGrid preds;
  preds.grid = targets.grid;
  preds.tiles.resize(targets.tiles.size());
  for (size_t k = 0; k < targets.tiles.size(); ++k) {
    const TileTarget& t = targets.tiles[k];
    TilePrediction& p = preds.tiles[k];
    p.bin_logits.assign(targets.n_bins, -30.0);
    p.residuals.assign(targets.n_bins, 0.0);
    p.embedding.assign(embedding_dim, 0.0);
    p.log_var = {-50.0, -50.0, -50.0};
    if (!t.occupied) {
      p.score_logit = -30.0;
      continue;
    }
    p.score_logit = 30.0;
    p.r = t.r;
    p.dz = t.dz;
    const int b = nearest_bin(t.phi, targets.n_bins);
    p.bin_logits[b] = 30.0;
    p.residuals = t.angle.residuals;
    if (embedding_dim > 0) {
      p.embedding[t.lane_id % embedding_dim] = embedding_spacing * (1 + t.lane_id / embedding_dim);
    }
  }
  return preds;
}

std::vector<DecodedTile> decode_tiles(const PredictionGrid& preds, const CameraPose& pose,
                                      double score_threshold) {
  if (score_threshold < 0.0 || score_threshold > 1.0) {
    throw std::invalid_argument("score threshold must lie in [0, 1]");
  }
  const GridConfig& grid = preds.grid;
  std::vector<DecodedTile> out;
  for (int j = 0; j < grid.height_tiles; ++j) {
    for (int i = 0; i < grid.width_tiles; ++i) {
      const TilePrediction& p = preds.at(i, j);
      const double score = p.score();
      if (score < score_threshold) continue;
      DecodedTile d;
      d.i = i;
      d.j = j;
      d.center = tile_center(grid, i, j);
      d.r = p.r;
      d.phi = p.phi();
      d.dz = p.dz;
      for (int k = 0; k < 3; ++k) d.variance[k] = std::exp(p.log_var[k]);
      const Vec2 bev = segment_point_bev(d.r, d.phi, d.center);
      d.road_point = Vec3(bev.x(), bev.y(), d.dz);
      d.point = segment_to_camera(d.r, d.phi, d.dz, d.center, pose);
      d.direction = segment_direction_camera(d.phi, pose);
      d.covariance = propagate_covariance(d.variance[0], d.variance[1], d.variance[2], d.r,
                                          d.phi, d.dz, d.center, pose);
      d.score = score;
      d.embedding = p.embedding;
      out.push_back(std::move(d));
    }
  }
  return out;
}

void rescale_variances(DecodedTile& tile, const std::array<double, 3>& temperature,
                       const CameraPose& pose) {
  for (int k = 0; k < 3; ++k) tile.variance[k] *= temperature[k];
  tile.covariance = propagate_covariance(tile.variance[0], tile.variance[1], tile.variance[2],
                                         tile.r, tile.phi, tile.dz, tile.center, pose);
}

}  // namespace tilelane
