#include "confpose/hull.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <utility>

#include <Eigen/Geometry>
#include <gmpxx.h>

#include "confpose/error.hpp"

namespace confpose {

namespace {

constexpr double kCoplanarTolerance = 1e-12;

int orient3d_exact(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  mpq_class m[3][3];
  for (int k = 0; k < 3; ++k) {
    m[0][k] = mpq_class(b(k)) - mpq_class(a(k));
    m[1][k] = mpq_class(c(k)) - mpq_class(a(k));
    m[2][k] = mpq_class(d(k)) - mpq_class(a(k));
  }
  const mpq_class det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                        m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                        m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  return sgn(det);
}

double signed_volume6(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).cross(c - a).dot(d - a);
}

}  // namespace

int orient3d(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  const Vec3 u = b - a, v = c - a, w = d - a;
  const double det = u(0) * (v(1) * w(2) - v(2) * w(1)) - u(1) * (v(0) * w(2) - v(2) * w(0)) +
                     u(2) * (v(0) * w(1) - v(1) * w(0));
  const double perm =
      std::abs(u(0)) * (std::abs(v(1) * w(2)) + std::abs(v(2) * w(1))) +
      std::abs(u(1)) * (std::abs(v(0) * w(2)) + std::abs(v(2) * w(0))) +
      std::abs(u(2)) * (std::abs(v(0) * w(1)) + std::abs(v(1) * w(0)));
  // the differences themselves are rounded, so the bound is deliberately loose
  const double bound = 16.0 * std::numeric_limits<double>::epsilon() * perm;
  if (det > bound) return 1;
  if (det < -bound) return -1;
  return orient3d_exact(a, b, c, d);
}

double ConvexHull3::volume() const {
  Vec3 g = Vec3::Zero();
  std::set<int> used;
  for (const auto& f : faces) used.insert(f.begin(), f.end());
  for (int i : used) g += points[static_cast<std::size_t>(i)];
  g /= static_cast<double>(used.size());
  double v = 0.0;
  for (const auto& f : faces)
    v += signed_volume6(g, points[static_cast<std::size_t>(f[0])],
                        points[static_cast<std::size_t>(f[1])], points[static_cast<std::size_t>(f[2])]);
  return std::abs(v) / 6.0;
}

bool ConvexHull3::contains(const Vec3& p) const {
  for (const auto& f : faces)
    if (orient3d(points[static_cast<std::size_t>(f[0])], points[static_cast<std::size_t>(f[1])],
                 points[static_cast<std::size_t>(f[2])], p) > 0)
      return false;
  return !faces.empty();
}

ConvexHull3 convex_hull_3d(const std::vector<Vec3>& pts) {
  if (pts.size() < 4) fail(ErrorCode::DegenerateHull, "convex hull needs at least 4 points");
  for (const auto& p : pts)
    if (!p.allFinite()) fail(ErrorCode::DegenerateHull, "non-finite hull point");

  Vec3 lo = pts[0], hi = pts[0];
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double diag = (hi - lo).norm();
  const double tol = kCoplanarTolerance * diag;
  if (!(diag > 0.0)) fail(ErrorCode::DegenerateHull, "all hull points coincide");

  // initial tetrahedron from extreme points
  const int n = static_cast<int>(pts.size());
  auto at = [&](int i) -> const Vec3& { return pts[static_cast<std::size_t>(i)]; };
  int i0 = 0;
  for (int i = 1; i < n; ++i)
    if (at(i)(0) < at(i0)(0)) i0 = i;
  int i1 = i0;
  for (int i = 0; i < n; ++i)
    if ((at(i) - at(i0)).norm() > (at(i1) - at(i0)).norm()) i1 = i;
  const Vec3 axis = (at(i1) - at(i0)).normalized();
  auto line_dist = [&](int i) { return (at(i) - at(i0) - axis * axis.dot(at(i) - at(i0))).norm(); };
  int i2 = i0;
  for (int i = 0; i < n; ++i)
    if (line_dist(i) > line_dist(i2)) i2 = i;
  if (!(line_dist(i2) > tol)) fail(ErrorCode::DegenerateHull, "hull points are collinear");
  const Vec3 normal = (at(i1) - at(i0)).cross(at(i2) - at(i0)).normalized();
  auto plane_dist = [&](int i) { return std::abs(normal.dot(at(i) - at(i0))); };
  int i3 = i0;
  for (int i = 0; i < n; ++i)
    if (plane_dist(i) > plane_dist(i3)) i3 = i;
  if (!(plane_dist(i3) > tol)) fail(ErrorCode::DegenerateHull, "hull points are coplanar");

  ConvexHull3 hull;
  hull.points = pts;
  std::vector<std::array<int, 3>> faces;
  std::vector<char> alive;
  auto add_face = [&](int a, int b, int c) {
    faces.push_back({a, b, c});
    alive.push_back(1);
  };
  if (orient3d(at(i0), at(i1), at(i2), at(i3)) > 0) std::swap(i1, i2);
  // now i3 lies on the negative side of (i0, i1, i2)
  add_face(i0, i1, i2);
  add_face(i0, i3, i1);
  add_face(i1, i3, i2);
  add_face(i2, i3, i0);

  std::vector<int> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(0x5EEDULL);  // fixed: the result must not depend on the run
  std::shuffle(order.begin(), order.end(), rng);

  std::set<std::pair<int, int>> visible_edges;
  std::vector<std::size_t> visible;
  for (int p : order) {
    if (p == i0 || p == i1 || p == i2 || p == i3) continue;
    visible.clear();
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (!alive[f]) continue;
      const auto& fc = faces[f];
      if (orient3d(at(fc[0]), at(fc[1]), at(fc[2]), at(p)) > 0) visible.push_back(f);
    }
    if (visible.empty()) continue;
    visible_edges.clear();
    for (std::size_t f : visible) {
      const auto& fc = faces[f];
      for (int k = 0; k < 3; ++k) visible_edges.emplace(fc[k], fc[(k + 1) % 3]);
      alive[f] = 0;
    }
    for (const auto& [u, v] : visible_edges)
      if (!visible_edges.count({v, u})) add_face(u, v, p);
  }
  for (std::size_t f = 0; f < faces.size(); ++f)
    if (alive[f]) hull.faces.push_back(faces[f]);
  return hull;
}

double convex_hull_volume_3d(const std::vector<Vec3>& points) {
  return convex_hull_3d(points).volume();
}

}  // namespace confpose
