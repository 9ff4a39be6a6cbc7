#include "tilelane/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace tilelane {

Polyline LaneDetection::road_polyline() const {
  Polyline out;
  out.reserve(points.size());
  for (const LanePoint& p : points) out.push_back(p.road_point);
  return out;
}

namespace {

bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    if (a(k) != b(k)) return a(k) < b(k);
  }
  return false;
}

}  // namespace

std::vector<Eigen::VectorXd> mean_shift(const std::vector<Eigen::VectorXd>& points, double bandwidth,
                                        const MeanShiftOptions& opts) {
  if (points.empty()) throw std::invalid_argument("mean_shift: no points");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("mean_shift: bandwidth must be > 0");
  const double bw2 = bandwidth * bandwidth;

  struct Mode {
    Eigen::VectorXd x;
    int support;
  };
  std::vector<Mode> modes;
  modes.reserve(points.size());
  for (const Eigen::VectorXd& start : points) {
    Eigen::VectorXd x = start;
    for (int it = 0; it < opts.max_iters; ++it) {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(x.size());
      int n = 0;
      for (const Eigen::VectorXd& p : points) {
        if ((p - x).squaredNorm() <= bw2) {
          sum += p;
          ++n;
        }
      }
      if (n == 0) break;
      const Eigen::VectorXd next = sum / n;
      const double shift = (next - x).norm();
      x = next;
      if (shift < opts.tol) break;
    }
    int support = 0;
    for (const Eigen::VectorXd& p : points) support += (p - x).squaredNorm() <= bw2 ? 1 : 0;
    modes.push_back({x, support});
  }

  std::sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) {
    if (a.support != b.support) return a.support > b.support;
    return lex_less(a.x, b.x);
  });
  std::vector<Eigen::VectorXd> kept;
  const double merge = 0.5 * bandwidth;
  for (const Mode& m : modes) {
    bool dup = false;
    for (const Eigen::VectorXd& k : kept) {
      if ((k - m.x).norm() < merge) {
        dup = true;
        break;
      }
    }
    if (!dup) kept.push_back(m.x);
  }
  return kept;
}

std::vector<std::vector<int>> cluster_tiles(const std::vector<DecodedTile>& tiles, double delta_push,
                                            int min_members) {
  if (tiles.empty()) return {};
  const double radius = 0.5 * delta_push;
  std::vector<Eigen::VectorXd> pts;
  pts.reserve(tiles.size());
  for (const DecodedTile& t : tiles) {
    pts.push_back(Eigen::Map<const Eigen::VectorXd>(t.embedding.data(),
                                                    static_cast<Eigen::Index>(t.embedding.size())));
  }
  const auto modes = mean_shift(pts, radius);
  std::vector<std::vector<int>> groups(modes.size());
  for (size_t k = 0; k < pts.size(); ++k) {
    int best = -1;
    double best_d = radius;
    for (size_t m = 0; m < modes.size(); ++m) {
      const double d = (pts[k] - modes[m]).norm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(m);
      }
    }
    if (best >= 0) groups[best].push_back(static_cast<int>(k));
  }
  std::vector<std::vector<int>> out;
  for (auto& g : groups) {
    if (static_cast<int>(g.size()) >= min_members) out.push_back(std::move(g));
  }
  return out;
}

namespace {

Vec2 bev_direction(double phi) { return {std::cos(phi), std::sin(phi)}; }

double endpoint_gap(const DecodedTile& a, const DecodedTile& b, double half) {
  const Vec2 pa = a.road_point.head<2>();
  const Vec2 pb = b.road_point.head<2>();
  const Vec2 da = bev_direction(a.phi);
  const Vec2 db = bev_direction(b.phi);
  double best = std::numeric_limits<double>::infinity();
  for (double sa : {-1.0, 1.0}) {
    for (double sb : {-1.0, 1.0}) {
      best = std::min(best, ((pa + sa * half * da) - (pb + sb * half * db)).norm());
    }
  }
  return best;
}

}  // namespace

std::vector<std::vector<int>> greedy_cluster(const std::vector<DecodedTile>& tiles,
                                             const GreedyOptions& opts) {
  const int n = static_cast<int>(tiles.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return tiles[a].score > tiles[b].score; });
  std::vector<char> used(n, 0);
  const double half = 0.5 * opts.segment_length;

  std::vector<std::vector<int>> out;
  for (int seed : order) {
    if (used[seed]) continue;
    used[seed] = 1;
    std::vector<int> chain{seed};
    int head = seed;
    int tail = seed;
    while (true) {
      int best = -1;
      bool at_head = true;
      double best_gap = opts.segment_length;
      for (int c : order) {
        if (used[c]) continue;
        for (int end : {head, tail}) {
          if (std::abs(wrap_angle(tiles[c].phi - tiles[end].phi)) >= opts.max_angle) continue;
          const double gap = endpoint_gap(tiles[end], tiles[c], half);
          if (gap < best_gap) {
            best_gap = gap;
            best = c;
            at_head = end == head;
          }
        }
      }
      if (best < 0) break;
      used[best] = 1;
      chain.push_back(best);
      if (head == tail) {
        const Vec2 step = tiles[best].road_point.head<2>() - tiles[seed].road_point.head<2>();
        at_head = step.dot(bev_direction(tiles[seed].phi)) >= 0.0;
      }
      (at_head ? head : tail) = best;
    }
    if (static_cast<int>(chain.size()) >= opts.min_members) out.push_back(std::move(chain));
  }
  return out;
}

namespace {

std::vector<int> nearest_neighbour_walk(const std::vector<Vec2>& pts, int start) {
  const int n = static_cast<int>(pts.size());
  std::vector<char> seen(n, 0);
  std::vector<int> walk{start};
  seen[start] = 1;
  int cur = start;
  for (int step = 1; step < n; ++step) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k) {
      if (seen[k]) continue;
      const double d = (pts[k] - pts[cur]).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    seen[best] = 1;
    walk.push_back(best);
    cur = best;
  }
  return walk;
}

LanePoint to_lane_point(const DecodedTile& t) {
  LanePoint p;
  p.i = t.i;
  p.j = t.j;
  p.r = t.r;
  p.phi = t.phi;
  p.dz = t.dz;
  p.variance = t.variance;
  p.road_point = t.road_point;
  p.point = t.point;
  p.direction = t.direction;
  p.covariance = t.covariance;
  p.score = t.score;
  return p;
}

}  // namespace

LaneDetection order_points(const std::vector<DecodedTile>& tiles, const std::vector<int>& members) {
  if (members.size() < 2) throw std::invalid_argument("order_points: need at least 2 points");
  std::vector<Vec2> pts;
  Vec2 mean = Vec2::Zero();
  Vec2 heading = Vec2::Zero();
  for (int m : members) {
    pts.push_back(tiles.at(m).road_point.head<2>());
    mean += pts.back();
    heading += bev_direction(tiles[m].phi);
  }
  mean /= static_cast<double>(pts.size());
  double spread = 0.0;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const Vec2& p : pts) {
    spread = std::max(spread, (p - mean).norm());
    cov += (p - mean) * (p - mean).transpose();
  }
  if (spread < 1e-9) throw std::invalid_argument("order_points: all points coincide");

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  Vec2 axis = eig.eigenvectors().col(1);
  if (axis.dot(heading) < 0.0) axis = -axis;
  int start = 0;
  for (size_t k = 1; k < pts.size(); ++k) {
    if (axis.dot(pts[k]) < axis.dot(pts[start])) start = static_cast<int>(k);
  }
  std::vector<int> walk = nearest_neighbour_walk(pts, start);
  walk = nearest_neighbour_walk(pts, walk.back());

  // Run the chain along the predicted travel direction.
  double agreement = 0.0;
  for (size_t k = 0; k + 1 < walk.size(); ++k) {
    agreement += (pts[walk[k + 1]] - pts[walk[k]]).dot(heading);
  }
  if (agreement < 0.0) std::reverse(walk.begin(), walk.end());

  LaneDetection det;
  double score_sum = 0.0;
  for (size_t k = 0; k < walk.size(); ++k) {
    const DecodedTile& t = tiles[members[walk[k]]];
    LanePoint p = to_lane_point(t);
    const size_t a = k == 0 ? 0 : k - 1;
    const size_t b = k + 1 == walk.size() ? k : k + 1;
    const Vec2 tangent = pts[walk[b]] - pts[walk[a]];
    if (tangent.dot(bev_direction(t.phi)) < 0.0) p.direction = -p.direction;
    det.points.push_back(p);
    det.members.push_back(members[walk[k]]);
    score_sum += t.score;
  }
  det.score = score_sum / static_cast<double>(walk.size());
  return det;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("adjusted_rand_index: size mismatch");
  const double n = static_cast<double>(a.size());
  if (a.size() < 2) return 1.0;
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ca, cb;
  for (size_t k = 0; k < a.size(); ++k) {
    joint[{a[k], b[k]}] += 1.0;
    ca[a[k]] += 1.0;
    cb[b[k]] += 1.0;
  }
  auto c2 = [](double x) { return 0.5 * x * (x - 1.0); };
  double sum_joint = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [k, v] : joint) sum_joint += c2(v);
  for (const auto& [k, v] : ca) sum_a += c2(v);
  for (const auto& [k, v] : cb) sum_b += c2(v);
  const double expected = sum_a * sum_b / c2(n);
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (sum_joint - expected) / (max_index - expected);
}

}  // namespace tilelane
