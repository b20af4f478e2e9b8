#pragma once

#include <cmath>
#include <compare>
#include <vector>

namespace tracklabel {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(const Point& a, const Point& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Orders points by (y, x); used wherever a deterministic point order is needed.
inline bool raster_less(const Point& a, const Point& b) {
  if (a.y != b.y) return a.y < b.y;
  return a.x < b.x;
}

/// Detections or annotations of one frame. Frames are numbered from 1.
struct PointSet {
  int frame = 1;
  std::vector<Point> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  friend bool operator==(const PointSet&, const PointSet&) = default;
};

/// Detections for a whole sequence; element i holds frame i + 1.
using Sequence = std::vector<PointSet>;

}  // namespace tracklabel
