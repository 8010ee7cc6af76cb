#pragma once

#include <vector>

#include <Eigen/Core>

namespace xwalk {

using Vec2 = Eigen::Vector2d;

/// Convex polygon in map-frame meters. Vertex order may be clockwise or
/// counter-clockwise; the polygon is treated as a closed set.
class ConvexPolygon {
 public:
  ConvexPolygon() = default;
  explicit ConvexPolygon(std::vector<Vec2> vertices);

  const std::vector<Vec2>& vertices() const { return vertices_; }
  bool empty() const { return vertices_.empty(); }

  /// Boundary points count as inside.
  bool contains(const Vec2& p) const;

  /// True when the two closed polygons share at least one point.
  bool intersects(const ConvexPolygon& other) const;

  Vec2 centroid() const;

  /// Throws InvalidAreaConfig unless the polygon has >= 3 vertices, nonzero
  /// area and consistent turning direction.
  void validate() const;

 private:
  std::vector<Vec2> vertices_;
  double orientation_ = 1.0;
};

}  // namespace xwalk
