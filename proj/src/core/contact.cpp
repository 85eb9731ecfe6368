#include "contact.hpp"

#include <algorithm>
#include <cmath>

#include "lp.hpp"

namespace bariflex::contact {
namespace {

// Signed depth is concave along a segment for a convex body, so a ternary
// search finds the deepest point.
double deepest_on_segment(const ObjectShape2D& obj, const Pose2& pose, const Vec2& a, const Vec2& b) {
  auto depth = [&](double t) { return obj.query(pose, a + t * (b - a)).depth; };
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 80; ++i) {
    const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (depth(m1) < depth(m2)) {
      lo = m1;
    } else {
      hi = m2;
    }
  }
  double t = 0.5 * (lo + hi);
  if (depth(0.0) >= depth(t)) t = 0.0;
  if (depth(1.0) > depth(t)) t = 1.0;
  return t;
}

Vec2 rot90(const Vec2& v) { return Vec2(-v.y(), v.x()); }

bool feasible(const std::vector<ContactPoint>& contacts, double mu, const Vec2& com, double weight,
              const double budget[2], bool use_budget, std::vector<ContactPoint>* out) {
  const int nc = static_cast<int>(contacts.size());
  const int nv = 2 * nc;
  // Variables: per contact two cone-edge magnitudes, f = l1 (n + mu t) + l2 (n - mu t).
  Eigen::MatrixXd a_eq = Eigen::MatrixXd::Zero(3, nv);
  Eigen::VectorXd b_eq(3);
  b_eq << 0.0, weight, 0.0;
  for (int i = 0; i < nc; ++i) {
    const Vec2 n = contacts[i].normal;
    const Vec2 t = rot90(n);
    const Vec2 e1 = n + mu * t, e2 = n - mu * t;
    const Vec2 r = contacts[i].position - com;
    a_eq.block<2, 1>(0, 2 * i) = e1;
    a_eq.block<2, 1>(0, 2 * i + 1) = e2;
    a_eq(2, 2 * i) = r.x() * e1.y() - r.y() * e1.x();
    a_eq(2, 2 * i + 1) = r.x() * e2.y() - r.y() * e2.x();
  }
  Eigen::MatrixXd a_ub(use_budget ? 2 : 0, nv);
  Eigen::VectorXd b_ub(use_budget ? 2 : 0);
  if (use_budget) {
    a_ub.setZero();
    for (int i = 0; i < nc; ++i) {
      const int fi = contacts[i].finger == 1 ? 1 : 0;
      a_ub(fi, 2 * i) = 1.0;
      a_ub(fi, 2 * i + 1) = 1.0;
    }
    b_ub << budget[0], budget[1];
  }
  // Minimise the total normal force for a canonical answer.
  const Eigen::VectorXd c = Eigen::VectorXd::Ones(nv);
  const lp::Result r = lp::solve(c, a_eq, b_eq, a_ub, b_ub);
  if (r.status != lp::Status::optimal) return false;
  if (out) {
    *out = contacts;
    for (int i = 0; i < nc; ++i) {
      (*out)[i].normal_force = r.x(2 * i) + r.x(2 * i + 1);
      (*out)[i].tangential_force = mu * (r.x(2 * i) - r.x(2 * i + 1));
    }
  }
  return true;
}

}  // namespace

std::vector<ContactPoint> detect_contacts(const std::vector<SurfacePolyline>& surfaces, const ObjectShape2D& object,
                                          const Pose2& pose, double tolerance) {
  std::vector<ContactPoint> out;
  for (const SurfacePolyline& s : surfaces) {
    for (std::size_t i = 0; i + 1 < s.points.size(); ++i) {
      const Vec2& a = s.points[i];
      const Vec2& b = s.points[i + 1];
      const double t = deepest_on_segment(object, pose, a, b);
      const Vec2 p = a + t * (b - a);
      const SurfaceQuery q = object.query(pose, p);
      if (q.depth >= -tolerance) {
        ContactPoint c;
        c.position = p;
        c.normal = -q.normal;
        // Away from the free ends of the polyline the surface itself is the
        // face in contact (object corner on a flat pad), so its normal wins.
        const bool free_end = (i == 0 && t <= 1e-9) || (i + 2 == s.points.size() && t >= 1.0 - 1e-9);
        if (!free_end && (b - a).norm() > 0.0) {
          Vec2 n(-(b - a).y(), (b - a).x());
          n.normalize();
          if (n.dot(c.normal) < 0.0) n = -n;
          c.normal = n;
        }
        c.penetration = q.depth;
        c.finger = s.finger;
        out.push_back(c);
      }
    }
  }
  return out;
}

std::string failure_name(GraspFailure f) {
  switch (f) {
    case GraspFailure::none: return "none";
    case GraspFailure::no_contact: return "no_contact";
    case GraspFailure::insufficient_friction: return "insufficient_friction";
    case GraspFailure::insufficient_force: return "insufficient_force";
    case GraspFailure::no_closure: return "no_closure";
  }
  return "unknown";
}

GraspVerdict check_grasp(const std::vector<ContactPoint>& contacts, const ObjectShape2D& object,
                         const Vec2& center_of_mass, double gravity, const double finger_budget[2]) {
  GraspVerdict v;
  if (contacts.empty()) {
    v.reason = GraspFailure::no_contact;
    v.detail = "no contacts";
    return v;
  }
  const double weight = object.mass * gravity;
  const double mu = object.friction_coefficient;
  if (feasible(contacts, mu, center_of_mass, weight, finger_budget, true, &v.forces)) {
    v.success = true;
    v.reason = GraspFailure::none;
    return v;
  }
  // Force is the limiting factor when up to ten times the squeeze would do;
  // friction when unit friction would succeed within the same budget.
  const double boosted[2] = {10.0 * finger_budget[0], 10.0 * finger_budget[1]};
  if (feasible(contacts, mu, center_of_mass, weight, boosted, true, nullptr)) {
    v.reason = GraspFailure::insufficient_force;
    v.detail = "weight needs more squeeze than the fingers deliver";
  } else if (feasible(contacts, std::max(1.0, mu), center_of_mass, weight, finger_budget, true, nullptr)) {
    v.reason = GraspFailure::insufficient_friction;
    v.detail = "balancing forces leave the friction cones";
  } else if (feasible(contacts, 1e3, center_of_mass, weight, finger_budget, false, nullptr)) {
    v.reason = GraspFailure::insufficient_friction;
    v.detail = "balancing forces leave the friction cones";
  } else {
    v.reason = GraspFailure::no_closure;
    v.detail = "contact geometry cannot balance the weight";
  }
  return v;
}

GraspVerdict check_grasp(const std::vector<ContactPoint>& contacts, const ObjectShape2D& object,
                         const Vec2& center_of_mass, double gravity, double force_budget) {
  const double budget[2] = {force_budget, force_budget};
  return check_grasp(contacts, object, center_of_mass, gravity, budget);
}

}  // namespace bariflex::contact
