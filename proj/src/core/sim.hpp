#pragma once

#include <array>
#include <string>
#include <vector>

#include "contact.hpp"
#include "fixture.hpp"

namespace bariflex::sim {

struct Command {
  enum class Kind { open, close, hold, position };
  Kind kind = Kind::hold;
  double value = 0.0;  // hold: motor torque [N m]; position: motor angle [rad]

  static Command open() { return {Kind::open, 0.0}; }
  static Command close() { return {Kind::close, 0.0}; }
  static Command hold(double torque) { return {Kind::hold, torque}; }
  static Command position(double angle) { return {Kind::position, angle}; }
  bool operator==(const Command&) const = default;
};

/// Force applied at a world point rigidly attached to one finger's fingertip.
struct ExternalLoad {
  int finger = 1;  // 0 = left, 1 = right
  Vec2 point = Vec2::Zero();
  Vec2 force = Vec2::Zero();
};

struct GripperState {
  actuation::MotorState motor;
  std::array<linkage::JointConfiguration, 2> joints;  // [left, right]; left is mirrored
  std::array<elastics::FinRayDeflection, 2> finray;
  std::array<double, 2> fingertip_spring_angles = {0.0, 0.0};
  std::vector<contact::ContactPoint> contacts;

  Command command = Command::hold(0.0);
  double command_time = 0.0;
  actuation::TrapezoidProfile profile;
};

/// Motor angle limits: the open and closed poses widened by the overtravel.
std::pair<double, double> motor_travel_limits(const GripperFixture& f);

GripperState make_state(const GripperFixture& f, double motor_angle = 0.0);

GripperState step(const GripperFixture& f, const GripperState& state, const Command& command,
                  const std::vector<ExternalLoad>& loads, double dt);

double state_aperture(const GripperFixture& f, const GripperState& s);

/// Worst mismatch between the stored joints and the ones re-derived from the motor angle [m].
double kinematic_error(const GripperFixture& f, const GripperState& s);

/// Largest node displacement between two states, fingertips and Fin-Ray nodes included [m].
double state_distance(const GripperFixture& f, const GripperState& a, const GripperState& b);

KeyValueFile state_to_config(const GripperState& s);

// Finger placement ----------------------------------------------------------

/// Right-finger surfaces at a crank angle, world frame.
struct FingerPlacement {
  linkage::JointConfiguration joints;
  Vec2 tip = Vec2::Zero();
  Vec2 up = Vec2::UnitY();      // along the finger, away from the tip
  Vec2 inward = -Vec2::UnitX(); // toward the centreline
  Pose2 finray_base;            // Fin-Ray local frame in the world
};

FingerPlacement place_finger(const GripperFixture& f, double crank_angle);

// Grasping ------------------------------------------------------------------

struct GraspOffset {
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;
};

struct GraspOutcome {
  contact::GraspVerdict verdict;
  std::array<double, 2> squeeze = {0.0, 0.0};       // realised per-finger force [N]
  std::array<double, 2> crank_angles = {0.0, 0.0};  // where each finger stopped
  Pose2 object_pose;
  std::vector<contact::ContactPoint> contacts;
};

/// Object pose for a fixture and offset: centred between the fingers at the
/// fixture's grasp height, turned by the canonical orientation plus dtheta.
Pose2 grasp_pose(const GripperFixture& f, const contact::ObjectShape2D& object, const GraspOffset& offset);

GraspOutcome grasp_at_pose(const GripperFixture& f, const contact::ObjectShape2D& object, const Pose2& pose,
                           double gravity = 9.81);

GraspOutcome grasp_object(const GripperFixture& f, const contact::ObjectShape2D& object, const GraspOffset& offset,
                          double gravity = 9.81);

// Compliance probe ----------------------------------------------------------

struct PressSample {
  double displacement = 0.0;  // probe travel past first contact [m]
  double force = 0.0;         // reaction [N]
  double motor_angle = 0.0;   // back-driven motor angle [rad]
};

struct PressResult {
  std::vector<PressSample> samples;
  bool capped = false;
  GripperState rest;          // after retraction and the reset command
  double rest_drift = 0.0;    // distance between `rest` and the initial state [m]
};

/// Quasistatic press of the right finger by the rig probe through the
/// displacement schedule. The finger is open and holding position, starting
/// from `start` (the pristine open state when null). Drift is measured
/// against the pristine state.
PressResult press_probe(const GripperFixture& f, const std::vector<double>& schedule, double force_cap = 60.0,
                        double probe_stiffness = 1e6, const GripperState* start = nullptr);

}  // namespace bariflex::sim
