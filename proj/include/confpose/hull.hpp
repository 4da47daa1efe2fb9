#pragma once
// Incremental 3D convex hull with exact orientation signs.

#include <array>
#include <vector>

#include "confpose/core.hpp"

namespace confpose {

/// Sign of det[b - a, c - a, d - a]; a filtered double evaluation falls back
/// to exact rational arithmetic when the result is within rounding error.
int orient3d(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

struct ConvexHull3 {
  std::vector<Vec3> points;
  std::vector<std::array<int, 3>> faces;  // outward, counter-clockwise seen from outside
  double volume() const;
  /// Closed membership test (exact signs).
  bool contains(const Vec3& p) const;
};

/// Throws DegenerateHull for fewer than 4 points or when the points are
/// coplanar within 1e-12 of the bounding-box diagonal.
ConvexHull3 convex_hull_3d(const std::vector<Vec3>& points);
double convex_hull_volume_3d(const std::vector<Vec3>& points);

}  // namespace confpose
