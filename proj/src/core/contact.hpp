#pragma once

#include <string>
#include <vector>

#include "shapes.hpp"

namespace bariflex::contact {

struct ContactPoint {
  Vec2 position = Vec2::Zero();
  Vec2 normal = Vec2::UnitX();  // unit, pointing into the object
  double normal_force = 0.0;
  double tangential_force = 0.0;  // along the normal rotated +90 deg
  double penetration = 0.0;
  int finger = 0;                 // 0 = left, 1 = right
};

/// Linear probe of the compliance rig.
struct Probe {
  Vec2 direction = Vec2::UnitY();
  double displacement = 0.0;
  double stiffness = 1e6;  // rig stiffness [N/m]
};

/// Open polyline on a finger surface; `finger` tags the owner.
struct SurfacePolyline {
  std::vector<Vec2> points;
  int finger = 0;
};

/// One candidate per polyline segment: the deepest point of the segment in
/// the placed object, reported when its penetration is at least -tolerance.
std::vector<ContactPoint> detect_contacts(const std::vector<SurfacePolyline>& surfaces, const ObjectShape2D& object,
                                          const Pose2& pose, double tolerance);

enum class GraspFailure { none, no_contact, insufficient_friction, insufficient_force, no_closure };
std::string failure_name(GraspFailure f);

struct GraspVerdict {
  bool success = false;
  GraspFailure reason = GraspFailure::no_contact;
  std::string detail;
  std::vector<ContactPoint> forces;  // a balancing force set when successful
};

/// Weight-only lift feasibility in the vertical plane: contact forces inside
/// the friction cones, each finger's total normal force within its budget,
/// balancing gravity at the centre of mass (force and moment).
GraspVerdict check_grasp(const std::vector<ContactPoint>& contacts, const ObjectShape2D& object,
                         const Vec2& center_of_mass, double gravity, const double finger_budget[2]);
GraspVerdict check_grasp(const std::vector<ContactPoint>& contacts, const ObjectShape2D& object,
                         const Vec2& center_of_mass, double gravity, double force_budget);

}  // namespace bariflex::contact
