#include "xwalk/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "xwalk/error.hpp"

namespace xwalk {
namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double signed_area(const std::vector<Vec2>& v) {
  double area = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) area += cross(v[i], v[(i + 1) % v.size()]);
  return 0.5 * area;
}

// Projects onto an axis and returns [min, max].
std::pair<double, double> project(const std::vector<Vec2>& v, const Vec2& axis) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& p : v) {
    const double d = p.dot(axis);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return {lo, hi};
}

bool separated_along_edges(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Vec2 edge = a[(i + 1) % a.size()] - a[i];
    const Vec2 axis(-edge.y(), edge.x());
    const auto [alo, ahi] = project(a, axis);
    const auto [blo, bhi] = project(b, axis);
    if (ahi < blo || bhi < alo) return true;
  }
  return false;
}

}  // namespace

ConvexPolygon::ConvexPolygon(std::vector<Vec2> vertices) : vertices_(std::move(vertices)) {
  orientation_ = signed_area(vertices_) >= 0.0 ? 1.0 : -1.0;
}

bool ConvexPolygon::contains(const Vec2& p) const {
  if (vertices_.size() < 3) return false;
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const Vec2& a = vertices_[i];
    const Vec2& b = vertices_[(i + 1) % vertices_.size()];
    if (orientation_ * cross(b - a, p - a) < 0.0) return false;
  }
  return true;
}

bool ConvexPolygon::intersects(const ConvexPolygon& other) const {
  if (empty() || other.empty()) return false;
  return !separated_along_edges(vertices_, other.vertices_) &&
         !separated_along_edges(other.vertices_, vertices_);
}

Vec2 ConvexPolygon::centroid() const {
  Vec2 c = Vec2::Zero();
  for (const auto& v : vertices_) c += v;
  return vertices_.empty() ? c : Vec2(c / static_cast<double>(vertices_.size()));
}

void ConvexPolygon::validate() const {
  if (vertices_.size() < 3) throw Error(ErrorKind::InvalidAreaConfig, "polygon needs at least 3 vertices");
  if (std::abs(signed_area(vertices_)) < 1e-12) throw Error(ErrorKind::InvalidAreaConfig, "polygon has zero area");
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const Vec2& a = vertices_[i];
    const Vec2& b = vertices_[(i + 1) % vertices_.size()];
    const Vec2& c = vertices_[(i + 2) % vertices_.size()];
    if (orientation_ * cross(b - a, c - b) < -1e-12) {
      throw Error(ErrorKind::InvalidAreaConfig, "polygon is not convex");
    }
  }
}

}  // namespace xwalk
