#include "tilelane/polyline.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace tilelane {

namespace {

Vec2 xy(const Vec3& p) { return p.head<2>(); }

// Liang-Barsky clip of segment a->b; returns false if fully outside.
bool clip_segment(const Vec2& a, const Vec2& b, const Rect& r, double& t0, double& t1) {
  t0 = 0.0;
  t1 = 1.0;
  const Vec2 d = b - a;
  const double p[4] = {-d.x(), d.x(), -d.y(), d.y()};
  const double q[4] = {a.x() - r.x0, r.x1 - a.x(), a.y() - r.y0, r.y1 - a.y()};
  for (int k = 0; k < 4; ++k) {
    if (p[k] == 0.0) {
      if (q[k] < 0.0) return false;
      continue;
    }
    const double t = q[k] / p[k];
    if (p[k] < 0.0) {
      t0 = std::max(t0, t);
    } else {
      t1 = std::min(t1, t);
    }
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

double polyline_length(const Polyline& line) {
  double len = 0.0;
  for (size_t k = 1; k < line.size(); ++k) len += (xy(line[k]) - xy(line[k - 1])).norm();
  return len;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 d = b - a;
  const double dd = d.squaredNorm();
  double t = dd > 0.0 ? (p - a).dot(d) / dd : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (a + t * d - p).norm();
}

NearestPoint nearest_on_polyline(const Polyline& line, const Vec2& p) {
  if (line.empty()) throw std::invalid_argument("nearest_on_polyline: empty polyline");
  NearestPoint best;
  best.distance = std::numeric_limits<double>::infinity();
  if (line.size() == 1) {
    best.distance = (xy(line[0]) - p).norm();
    best.point = line[0];
    return best;
  }
  for (size_t k = 0; k + 1 < line.size(); ++k) {
    const Vec2 a = xy(line[k]);
    const Vec2 d = xy(line[k + 1]) - a;
    const double dd = d.squaredNorm();
    double t = dd > 0.0 ? (p - a).dot(d) / dd : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dist = (a + t * d - p).norm();
    if (dist < best.distance) {
      best.distance = dist;
      best.segment = static_cast<int>(k);
      best.t = t;
      best.point = line[k] + t * (line[k + 1] - line[k]);
    }
  }
  return best;
}

std::vector<ArcSample> resample_midpoints(const Polyline& line, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("resample step must be positive");
  std::vector<ArcSample> out;
  for (size_t k = 0; k + 1 < line.size(); ++k) {
    const double seg = (xy(line[k + 1]) - xy(line[k])).norm();
    if (seg <= 0.0) continue;
    const int pieces = std::max(1, static_cast<int>(std::ceil(seg / step - 1e-12)));
    const double w = seg / pieces;
    for (int m = 0; m < pieces; ++m) {
      const double t = (m + 0.5) / pieces;
      out.push_back({line[k] + t * (line[k + 1] - line[k]), w});
    }
  }
  return out;
}

std::vector<Polyline> clip_polyline(const Polyline& line, const Rect& rect) {
  std::vector<Polyline> pieces;
  Polyline current;
  auto flush = [&] {
    if (current.size() >= 2) pieces.push_back(std::move(current));
    current.clear();
  };
  for (size_t k = 0; k + 1 < line.size(); ++k) {
    const Vec3& a = line[k];
    const Vec3& b = line[k + 1];
    double t0, t1;
    if (!clip_segment(xy(a), xy(b), rect, t0, t1)) {
      flush();
      continue;
    }
    const Vec3 pa = a + t0 * (b - a);
    const Vec3 pb = a + t1 * (b - a);
    if (current.empty()) {
      current.push_back(pa);
    } else if ((current.back() - pa).norm() > 1e-12) {
      flush();
      current.push_back(pa);
    }
    if ((pb - current.back()).norm() > 1e-12 || current.size() == 1) current.push_back(pb);
    if (t1 < 1.0) flush();
  }
  flush();
  // Drop zero-length pieces.
  std::erase_if(pieces, [](const Polyline& p) { return polyline_length(p) <= 0.0; });
  return pieces;
}

double segment_rect_distance(const Vec2& a, const Vec2& b, const Rect& rect) {
  double t0, t1;
  if (clip_segment(a, b, rect, t0, t1)) return 0.0;
  const Vec2 corners[4] = {{rect.x0, rect.y0}, {rect.x1, rect.y0},
                           {rect.x1, rect.y1}, {rect.x0, rect.y1}};
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 4; ++k) {
    best = std::min(best, point_segment_distance(corners[k], a, b));
    best = std::min(best, point_segment_distance(a, corners[k], corners[(k + 1) % 4]));
    best = std::min(best, point_segment_distance(b, corners[k], corners[(k + 1) % 4]));
  }
  return best;
}

}  // namespace tilelane
