#pragma once

#include <string>
#include <vector>

#include "linkage.hpp"

namespace bariflex {

/// Rigid planar transform: world = R(angle) * local + translation.
struct Pose2 {
  double angle = 0.0;
  Vec2 translation = Vec2::Zero();

  Vec2 apply(const Vec2& p) const;
  Vec2 rotate(const Vec2& v) const;
  Vec2 inverse_apply(const Vec2& p) const;
  Vec2 inverse_rotate(const Vec2& v) const;
};

/// Signed distance sample: `depth` > 0 inside the body, `normal` is the
/// outward unit normal at the closest boundary point.
struct SurfaceQuery {
  double depth = 0.0;
  Vec2 normal = Vec2::UnitX();
  Vec2 closest = Vec2::Zero();
};

namespace contact {

enum class ShapeKind { circle, convex_polygon };

/// Object cross-section in its own frame (centroid near the origin). The
/// placed object is `shape` transformed by `pose`.
struct ObjectShape2D {
  std::string name;
  ShapeKind kind = ShapeKind::circle;
  double radius = 0.0;
  std::vector<Vec2> vertices;  // counter-clockwise
  double mass = 0.1;
  double friction_coefficient = 0.4;
  double canonical_orientation = 0.0;
  Vec2 center_of_mass = Vec2::Zero();

  void validate() const;
  SurfaceQuery query(const Pose2& pose, const Vec2& world_point) const;
  /// World-space vertical extent [ymin, ymax].
  std::pair<double, double> vertical_extent(const Pose2& pose) const;
  /// Horizontal extent of the placed body along the line y = const; false if the line misses.
  bool horizontal_extent(const Pose2& pose, double y, double& xmin, double& xmax) const;
  double width(const Pose2& pose) const;
};

ObjectShape2D make_circle(const std::string& name, double radius, double mass, double friction);
ObjectShape2D make_rectangle(const std::string& name, double width, double height, double mass, double friction);
ObjectShape2D make_rounded_rectangle(const std::string& name, double width, double height, double corner_radius,
                                     double mass, double friction, int arc_segments = 6);
ObjectShape2D make_polygon(const std::string& name, std::vector<Vec2> vertices, double mass, double friction);

}  // namespace contact
}  // namespace bariflex
