#pragma once

#include "tilelane/geometry.hpp"

#include <vector>

namespace tilelane {

using Polyline = std::vector<Vec3>;

struct Rect {
  double x0, y0, x1, y1;
  bool contains(const Vec2& p) const {
    return p.x() >= x0 && p.x() <= x1 && p.y() >= y0 && p.y() <= y1;
  }
};

/// BEV (x, y) arc length.
double polyline_length(const Polyline& line);

struct NearestPoint {
  double distance = 0.0;  // BEV distance
  Vec3 point;             // interpolated point on the polyline (z included)
  int segment = 0;        // index of the segment start vertex
  double t = 0.0;         // parameter within the segment, [0, 1]
};

/// Nearest point of the polyline to p, measured in the BEV plane.
NearestPoint nearest_on_polyline(const Polyline& line, const Vec2& p);

/// Samples at the midpoints of consecutive pieces of length <= step along the
/// BEV arc length; each sample carries the length of its piece.
struct ArcSample {
  Vec3 point;
  double weight;
};
std::vector<ArcSample> resample_midpoints(const Polyline& line, double step);

/// Clips the polyline to an axis-aligned rectangle in BEV. Returns the
/// inside pieces, each with the boundary intersection points inserted.
std::vector<Polyline> clip_polyline(const Polyline& line, const Rect& rect);

/// BEV distance between segment [a, b] and a rectangle (0 if they intersect).
double segment_rect_distance(const Vec2& a, const Vec2& b, const Rect& rect);

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);

}  // namespace tilelane
