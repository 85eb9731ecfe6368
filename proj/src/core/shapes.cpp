#include "shapes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "errors.hpp"

namespace bariflex {

Vec2 Pose2::rotate(const Vec2& v) const {
  const double c = std::cos(angle), s = std::sin(angle);
  return Vec2(c * v.x() - s * v.y(), s * v.x() + c * v.y());
}
Vec2 Pose2::apply(const Vec2& p) const { return rotate(p) + translation; }
Vec2 Pose2::inverse_rotate(const Vec2& v) const {
  const double c = std::cos(angle), s = std::sin(angle);
  return Vec2(c * v.x() + s * v.y(), -s * v.x() + c * v.y());
}
Vec2 Pose2::inverse_apply(const Vec2& p) const { return inverse_rotate(p - translation); }

namespace contact {
namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

Vec2 polygon_centroid(const std::vector<Vec2>& v) {
  double area = 0.0;
  Vec2 c = Vec2::Zero();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2& a = v[i];
    const Vec2& b = v[(i + 1) % v.size()];
    const double w = cross(a, b);
    area += w;
    c += w * (a + b);
  }
  return c / (3.0 * area);
}

}  // namespace

void ObjectShape2D::validate() const {
  if (!(mass > 0)) throw InvalidArgument(name + ": mass must be positive");
  if (!(friction_coefficient > 0 && friction_coefficient <= 2)) throw InvalidArgument(name + ": friction outside (0, 2]");
  if (kind == ShapeKind::circle) {
    if (!(radius > 0)) throw InvalidArgument(name + ": radius must be positive");
    return;
  }
  if (vertices.size() < 3) throw InvalidArgument(name + ": polygon needs at least 3 vertices");
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const Vec2& a = vertices[i];
    const Vec2& b = vertices[(i + 1) % vertices.size()];
    const Vec2& c = vertices[(i + 2) % vertices.size()];
    if (cross(b - a, c - b) <= 0) throw InvalidArgument(name + ": polygon must be convex and counter-clockwise");
  }
}

SurfaceQuery ObjectShape2D::query(const Pose2& pose, const Vec2& world_point) const {
  const Vec2 p = pose.inverse_apply(world_point);
  SurfaceQuery out;
  if (kind == ShapeKind::circle) {
    const double r = p.norm();
    const Vec2 n = r > 1e-15 ? Vec2(p / r) : Vec2::UnitX();
    out.depth = radius - r;
    out.normal = pose.rotate(n);
    out.closest = pose.apply(radius * n);
    return out;
  }
  // Convex polygon: inside depth is the smallest edge distance; outside it is
  // minus the distance to the nearest boundary point.
  double best_inside = std::numeric_limits<double>::infinity();
  Vec2 inside_normal = Vec2::UnitX();
  bool inside = true;
  double best_outside = std::numeric_limits<double>::infinity();
  Vec2 outside_closest = Vec2::Zero();
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const Vec2& a = vertices[i];
    const Vec2& b = vertices[(i + 1) % vertices.size()];
    const Vec2 e = b - a;
    const Vec2 n = Vec2(e.y(), -e.x()).normalized();
    const double d = -(p - a).dot(n);
    if (d < 0) inside = false;
    if (d < best_inside) {
      best_inside = d;
      inside_normal = n;
    }
    const double t = std::clamp((p - a).dot(e) / e.squaredNorm(), 0.0, 1.0);
    const Vec2 q = a + t * e;
    const double dist = (p - q).norm();
    if (dist < best_outside) {
      best_outside = dist;
      outside_closest = q;
    }
  }
  if (inside) {
    out.depth = best_inside;
    out.normal = pose.rotate(inside_normal);
    out.closest = pose.apply(p + best_inside * inside_normal);
  } else {
    out.depth = -best_outside;
    const Vec2 n = best_outside > 1e-15 ? Vec2((p - outside_closest) / best_outside) : inside_normal;
    out.normal = pose.rotate(n);
    out.closest = pose.apply(outside_closest);
  }
  return out;
}

std::pair<double, double> ObjectShape2D::vertical_extent(const Pose2& pose) const {
  if (kind == ShapeKind::circle) {
    const double cy = pose.translation.y();
    return {cy - radius, cy + radius};
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const Vec2& v : vertices) {
    const double y = pose.apply(v).y();
    lo = std::min(lo, y);
    hi = std::max(hi, y);
  }
  return {lo, hi};
}

bool ObjectShape2D::horizontal_extent(const Pose2& pose, double y, double& xmin, double& xmax) const {
  if (kind == ShapeKind::circle) {
    const double dy = y - pose.translation.y();
    if (std::abs(dy) > radius) return false;
    const double half = std::sqrt(radius * radius - dy * dy);
    xmin = pose.translation.x() - half;
    xmax = pose.translation.x() + half;
    return true;
  }
  xmin = std::numeric_limits<double>::infinity();
  xmax = -xmin;
  bool hit = false;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const Vec2 a = pose.apply(vertices[i]);
    const Vec2 b = pose.apply(vertices[(i + 1) % vertices.size()]);
    if ((a.y() - y) * (b.y() - y) > 0) continue;
    if (a.y() == b.y()) {
      xmin = std::min({xmin, a.x(), b.x()});
      xmax = std::max({xmax, a.x(), b.x()});
    } else {
      const double t = (y - a.y()) / (b.y() - a.y());
      const double x = a.x() + t * (b.x() - a.x());
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
    }
    hit = true;
  }
  return hit;
}

double ObjectShape2D::width(const Pose2& pose) const {
  if (kind == ShapeKind::circle) return 2.0 * radius;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const Vec2& v : vertices) {
    const double x = pose.apply(v).x();
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  return hi - lo;
}

ObjectShape2D make_circle(const std::string& name, double radius, double mass, double friction) {
  ObjectShape2D s;
  s.name = name;
  s.kind = ShapeKind::circle;
  s.radius = radius;
  s.mass = mass;
  s.friction_coefficient = friction;
  s.validate();
  return s;
}

ObjectShape2D make_polygon(const std::string& name, std::vector<Vec2> vertices, double mass, double friction) {
  ObjectShape2D s;
  s.name = name;
  s.kind = ShapeKind::convex_polygon;
  s.mass = mass;
  s.friction_coefficient = friction;
  const Vec2 c = polygon_centroid(vertices);
  for (Vec2& v : vertices) v -= c;
  s.vertices = std::move(vertices);
  s.validate();
  return s;
}

ObjectShape2D make_rectangle(const std::string& name, double width, double height, double mass, double friction) {
  const double w = 0.5 * width, h = 0.5 * height;
  return make_polygon(name, {Vec2(-w, -h), Vec2(w, -h), Vec2(w, h), Vec2(-w, h)}, mass, friction);
}

ObjectShape2D make_rounded_rectangle(const std::string& name, double width, double height, double corner_radius,
                                     double mass, double friction, int arc_segments) {
  const double w = 0.5 * width - corner_radius, h = 0.5 * height - corner_radius;
  const Vec2 centers[4] = {Vec2(w, -h), Vec2(w, h), Vec2(-w, h), Vec2(-w, -h)};
  std::vector<Vec2> v;
  for (int c = 0; c < 4; ++c) {
    const double start = -0.5 * kPi + c * 0.5 * kPi;
    for (int i = 0; i <= arc_segments; ++i) {
      const double a = start + 0.5 * kPi * i / arc_segments;
      v.push_back(centers[c] + corner_radius * Vec2(std::cos(a), std::sin(a)));
    }
  }
  return make_polygon(name, std::move(v), mass, friction);
}

}  // namespace contact
}  // namespace bariflex
