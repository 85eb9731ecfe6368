#include "sim.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace bariflex::sim {
namespace {

constexpr double kContactStiffness = 1e5;
constexpr double kCornerReach = 1e-3;  // Fin-Ray contact this close to a corner wraps it [m]
constexpr int kPadPieces = 8;

Vec2 mirror(const Vec2& p) { return Vec2(-p.x(), p.y()); }
Vec2 rot(const Vec2& v, double a) {
  const double c = std::cos(a), s = std::sin(a);
  return Vec2(c * v.x() - s * v.y(), s * v.x() + c * v.y());
}

linkage::JointConfiguration mirror_joints(const linkage::JointConfiguration& q) {
  linkage::JointConfiguration m = q;
  m.crank_angle = kPi - q.crank_angle;
  m.rocker_angle = kPi - q.rocker_angle;
  m.coupler_angle = kPi - q.coupler_angle;
  m.fingertip_orientation = kPi - q.fingertip_orientation;
  m.crank_pivot = mirror(q.crank_pivot);
  m.rocker_pivot = mirror(q.rocker_pivot);
  m.crank_end = mirror(q.crank_end);
  m.coupler_end = mirror(q.coupler_end);
  m.fingertip_position = mirror(q.fingertip_position);
  return m;
}

contact::ObjectShape2D mirror_object(const contact::ObjectShape2D& o) {
  contact::ObjectShape2D m = o;
  if (o.kind == contact::ShapeKind::convex_polygon) {
    m.vertices.assign(o.vertices.rbegin(), o.vertices.rend());
    for (Vec2& v : m.vertices) v = mirror(v);
  }
  m.center_of_mass = mirror(o.center_of_mass);
  return m;
}

Pose2 mirror_pose(const Pose2& p) {
  Pose2 m;
  m.angle = -p.angle;
  m.translation = mirror(p.translation);
  return m;
}

void set_joints(const GripperFixture& f, GripperState& s) {
  const double crank = linkage::crank_from_motor(f.geometry, s.motor.angle);
  s.joints[1] = linkage::solve_loop(f.geometry, crank);
  s.joints[0] = mirror_joints(s.joints[1]);
}

// Motor-side torque of a world force at a point carried by the right coupler.
double reflected_torque(const GripperFixture& f, const linkage::JointConfiguration& q, const Vec2& point,
                        const Vec2& force) {
  const Vec2 local = rot(point - q.crank_end, -q.coupler_angle);
  const Vec2 rate = linkage::coupler_point_rate(f.geometry, q, local);
  // d(crank)/d(motor) = -1/gear.
  return -force.dot(rate) / f.geometry.gear_ratio;
}

std::vector<Vec2> fingertip_points(const GripperFixture& f, const GripperState& s, int finger) {
  const FingerPlacement p = place_finger(f, s.joints[1].crank_angle);
  std::vector<Vec2> pts = {p.tip, p.tip + f.pad_length * p.up};
  if (f.has_finray()) {
    const auto& nodes = s.finray[finger].deformed_node_positions;
    for (const Vec2& n : nodes) pts.push_back(p.finray_base.apply(n));
  }
  // Flexion lifts the pad tip about the joint at the top of the pad.
  const double a = s.fingertip_spring_angles[finger];
  if (a != 0.0) pts[0] = pts[1] + rot(pts[0] - pts[1], -a);
  if (finger == 0) {
    for (Vec2& v : pts) v = mirror(v);
  }
  return pts;
}

}  // namespace

std::pair<double, double> motor_travel_limits(const GripperFixture& f) {
  const auto& g = f.geometry;
  const double a = linkage::motor_from_crank(g, g.crank_angle_open + linkage::kOvertravel);
  const double b = linkage::motor_from_crank(g, g.crank_angle_closed - linkage::kOvertravel);
  return {std::min(a, b), std::max(a, b)};
}

GripperState make_state(const GripperFixture& f, double motor_angle) {
  GripperState s;
  s.motor = actuation::make_state(f.motor, motor_angle);
  set_joints(f, s);
  if (f.has_finray()) {
    const elastics::FinRayFinger fr = elastics::build_finray(f.finray);
    s.finray[0] = s.finray[1] = elastics::finray_rest(fr);
  }
  s.command = Command::position(motor_angle);
  return s;
}

GripperState step(const GripperFixture& f, const GripperState& state, const Command& command,
                  const std::vector<ExternalLoad>& loads, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be positive and finite");
  GripperState s = state;
  const auto& m = f.motor;
  const auto& g = f.geometry;

  if (!(command == s.command)) {
    s.command = command;
    s.command_time = 0.0;
    if (command.kind == Command::Kind::open || command.kind == Command::Kind::close) {
      const double target = command.kind == Command::Kind::open ? 0.0 : linkage::motor_from_crank(g, g.crank_angle_closed);
      s.profile = actuation::make_profile(m, s.motor.encoder_reading, target);
    }
  }

  double tau = 0.0;
  switch (s.command.kind) {
    case Command::Kind::open:
    case Command::Kind::close: {
      const auto ref = s.profile.at(s.command_time + dt);
      const double ff = m.rotor_inertia * ref.acceleration + m.viscous_friction * ref.velocity +
                        (ref.velocity != 0.0 ? std::copysign(m.coulomb_friction, ref.velocity) : 0.0);
      tau = actuation::pd_torque(m, s.motor, ref.position, ref.velocity, ff);
      break;
    }
    case Command::Kind::hold:
      tau = std::clamp(s.command.value, -m.torque_limit, m.torque_limit);
      break;
    case Command::Kind::position:
      tau = actuation::pd_torque(m, s.motor, s.command.value, 0.0);
      break;
  }

  double tau_ext = 0.0;
  std::array<double, 2> flex_torque = {0.0, 0.0};
  for (const ExternalLoad& l : loads) {
    if (l.finger != 0 && l.finger != 1) throw InvalidArgument("load finger must be 0 or 1");
    if (!l.point.allFinite() || !l.force.allFinite()) throw InvalidArgument("load must be finite");
    // Work in the right-finger frame.
    const Vec2 p = l.finger == 1 ? l.point : mirror(l.point);
    const Vec2 F = l.finger == 1 ? l.force : mirror(l.force);
    tau_ext += reflected_torque(f, s.joints[1], p, F);
    if (f.finger == FingerKind::bariflex) {
      const FingerPlacement pl = place_finger(f, s.joints[1].crank_angle);
      const Vec2 joint = pl.tip + f.pad_length * pl.up;
      const Vec2 r = p - joint;
      flex_torque[l.finger] += -(r.x() * F.y() - r.y() * F.x());
    }
  }

  actuation::MotorState next = actuation::step_motor(m, s.motor, tau, tau_ext, dt);
  const auto [lo, hi] = motor_travel_limits(f);
  if (next.angle < lo || next.angle > hi) {
    next.angle = std::clamp(next.angle, lo, hi);
    next.velocity = 0.0;
    next.encoder_reading = actuation::quantize(m, next.angle);
  }
  s.motor = next;
  try {
    set_joints(f, s);
  } catch (const LinkageLocked& e) {
    throw LinkageLocked(std::string(e.what()) + "\nstate:\n" + state_to_config(state).dump());
  }

  for (int i = 0; i < 2; ++i) {
    const auto r = elastics::fingertip_spring_torque(f.spring, flex_torque[i] / f.spring.stiffness + f.spring.rest_angle,
                                                     flex_torque[i]);
    s.fingertip_spring_angles[i] = f.finger == FingerKind::bariflex ? r.angle : 0.0;
  }
  s.command_time += dt;
  return s;
}

double state_aperture(const GripperFixture& f, const GripperState& s) {
  return linkage::aperture(f.geometry, s.joints[1].crank_angle);
}

double kinematic_error(const GripperFixture& f, const GripperState& s) {
  const auto q = linkage::solve_loop(f.geometry, linkage::crank_from_motor(f.geometry, s.motor.angle));
  const auto ql = mirror_joints(q);
  double e = 0.0;
  e = std::max(e, (q.fingertip_position - s.joints[1].fingertip_position).norm());
  e = std::max(e, (q.coupler_end - s.joints[1].coupler_end).norm());
  e = std::max(e, (q.crank_end - s.joints[1].crank_end).norm());
  e = std::max(e, (ql.fingertip_position - s.joints[0].fingertip_position).norm());
  e = std::max(e, (ql.coupler_end - s.joints[0].coupler_end).norm());
  return e;
}

double state_distance(const GripperFixture& f, const GripperState& a, const GripperState& b) {
  double d = 0.0;
  for (int i = 0; i < 2; ++i) {
    const auto pa = fingertip_points(f, a, i);
    const auto pb = fingertip_points(f, b, i);
    if (pa.size() != pb.size()) return std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < pa.size(); ++k) d = std::max(d, (pa[k] - pb[k]).norm());
    d = std::max(d, (a.joints[i].coupler_end - b.joints[i].coupler_end).norm());
  }
  return d;
}

KeyValueFile state_to_config(const GripperState& s) {
  KeyValueFile kv;
  kv.set("motor_angle", s.motor.angle);
  kv.set("motor_velocity", s.motor.velocity);
  kv.set("encoder_reading", s.motor.encoder_reading);
  kv.set("crank_angle", s.joints[1].crank_angle);
  kv.set("tip_right", std::vector<double>{s.joints[1].fingertip_position.x(), s.joints[1].fingertip_position.y()});
  kv.set("tip_left", std::vector<double>{s.joints[0].fingertip_position.x(), s.joints[0].fingertip_position.y()});
  kv.set("spring_angles", std::vector<double>{s.fingertip_spring_angles[0], s.fingertip_spring_angles[1]});
  for (int i = 0; i < 2; ++i) {
    const auto& d = s.finray[i];
    const std::string p = i == 0 ? "finray_left." : "finray_right.";
    if (d.deformed_node_positions.empty()) continue;
    kv.set(p + "pin", d.pin_slide_position);
    kv.set(p + "front", d.front_rotations);
    kv.set(p + "back", d.back_rotations);
  }
  kv.set("contacts", static_cast<double>(s.contacts.size()));
  kv.set("command", static_cast<double>(static_cast<int>(s.command.kind)));
  kv.set("command_value", s.command.value);
  kv.set("command_time", s.command_time);
  return kv;
}

FingerPlacement place_finger(const GripperFixture& f, double crank_angle) {
  const auto& g = f.geometry;
  FingerPlacement p;
  p.joints = linkage::solve_loop(g, crank_angle);
  const auto open = linkage::solve_loop(g, g.crank_angle_open);
  const double delta = p.joints.coupler_angle - open.coupler_angle;
  p.tip = p.joints.fingertip_position;
  p.up = rot(Vec2::UnitY(), delta);
  p.inward = rot(-Vec2::UnitX(), delta);
  // The Fin-Ray base sits on the finger line above the pad; its apex leans
  // inward by the design's apex offset.
  const double above = (f.finger == FingerKind::bariflex ? f.pad_length : 0.0) + f.finray.length;
  p.finray_base.angle = kPi + delta;
  p.finray_base.translation = p.tip + above * p.up;
  return p;
}

// Grasping ------------------------------------------------------------------

namespace {

// Right finger pressed against a fixed object at one crank angle.
struct FingerContact {
  double squeeze = 0.0;       // force along the finger's inward axis [N]
  double normal_sum = 0.0;    // sum of contact normal forces [N]
  std::vector<contact::ContactPoint> contacts;
  elastics::FinRayDeflection finray;
  bool wrapped = false;       // an object corner is pressed into the Fin-Ray face
  bool on_pad = false;        // some contact is on the rigid pad
};

FingerContact press_right(const GripperFixture& f, const elastics::FinRayFinger* fr, const contact::ObjectShape2D& object,
                          const Pose2& pose, double crank, const elastics::FinRayDeflection* warm) {
  FingerContact out;
  const FingerPlacement pl = place_finger(f, crank);
  auto add = [&](const Vec2& x, const Vec2& n, double pen) {
    contact::ContactPoint c;
    c.position = x;
    c.normal = n;
    c.penetration = pen;
    c.normal_force = kContactStiffness * pen;
    c.finger = 1;
    out.squeeze += c.normal_force * n.dot(pl.inward);
    out.normal_sum += c.normal_force;
    out.contacts.push_back(c);
  };
  if (f.has_pad()) {
    contact::SurfacePolyline pad;
    pad.finger = 1;
    for (int i = 0; i <= kPadPieces; ++i) pad.points.push_back(pl.tip + (f.pad_length * i / kPadPieces) * pl.up);
    for (const auto& c : contact::detect_contacts({pad}, object, pose, 0.0)) {
      if (c.penetration > 0.0) {
        add(c.position, c.normal, c.penetration);
        out.on_pad = true;
      }
    }
  }
  if (fr) {
    elastics::SolveOptions opt;
    opt.contact_stiffness = kContactStiffness;
    const auto wrap = elastics::finray_contact_wrap(*fr, object, pose, pl.finray_base, warm, opt);
    out.finray = wrap.deflection;
    for (const auto& c : wrap.contacts) {
      const Vec2 x = pl.finray_base.apply(c.position);
      add(x, pl.finray_base.rotate(c.normal), c.penetration);
      for (const Vec2& v : object.vertices) {
        if ((pose.apply(v) - x).norm() < c.penetration + kCornerReach) out.wrapped = true;
      }
    }
  }
  return out;
}

// Undeformed right-finger surfaces at a crank angle.
std::vector<contact::SurfacePolyline> rest_surfaces(const GripperFixture& f, const elastics::FinRayFinger* fr,
                                                   double crank) {
  const FingerPlacement pl = place_finger(f, crank);
  std::vector<contact::SurfacePolyline> out;
  if (f.has_pad()) out.push_back({{pl.tip, pl.tip + f.pad_length * pl.up}, 1});
  if (fr) {
    const auto rest = elastics::finray_rest(*fr);
    contact::SurfacePolyline face;
    face.finger = 1;
    for (int i = 0; i < fr->n_front_nodes(); ++i) face.points.push_back(pl.finray_base.apply(rest.deformed_node_positions[i]));
    out.push_back(face);
  }
  return out;
}

bool overlaps(const std::vector<contact::SurfacePolyline>& surfaces, const contact::ObjectShape2D& object,
              const Pose2& pose) {
  for (const auto& c : contact::detect_contacts(surfaces, object, pose, 0.0)) {
    if (c.penetration > 0.0) return true;
  }
  return false;
}

// Sideways shift of the object, toward the right finger, at which it first
// touches the open right finger. False when it never does.
bool touch_shift(const GripperFixture& f, const elastics::FinRayFinger* fr, const contact::ObjectShape2D& object,
                 const Pose2& pose, double& shift) {
  const auto surfaces = rest_surfaces(f, fr, f.geometry.crank_angle_open);
  auto moved = [&](double t) {
    Pose2 p = pose;
    p.translation.x() += t;
    return p;
  };
  // At `hi` the object's origin sits on the finger line.
  double lo = -0.3, hi = place_finger(f, f.geometry.crank_angle_open).tip.x() - pose.translation.x();
  if (overlaps(surfaces, object, moved(lo)) || !overlaps(surfaces, object, moved(hi))) return false;
  for (int it = 0; it < 50; ++it) {
    const double mid = 0.5 * (lo + hi);
    (overlaps(surfaces, object, moved(mid)) ? hi : lo) = mid;
  }
  shift = hi;
  return true;
}

struct FingerClose {
  double crank = 0.0;
  FingerContact state;
};

// Close one finger until its squeeze reaches the force it can deliver, or
// the closed stop. Marches in small steps from first touch so the elastic
// solve always starts close to its answer.
FingerClose close_right(const GripperFixture& f, const elastics::FinRayFinger* fr, const contact::ObjectShape2D& object,
                        const Pose2& pose) {
  const auto& g = f.geometry;
  auto available = [&](double crank) {
    return std::min(f.force_limit, linkage::fingertip_force(g, crank, f.motor.torque_limit));
  };
  const double open = g.crank_angle_open, closed = g.crank_angle_closed;
  FingerClose r;
  if (!overlaps(rest_surfaces(f, fr, closed), object, pose)) {
    r.crank = closed;
    r.state = press_right(f, fr, object, pose, closed, nullptr);
    return r;
  }
  double lo = open, hi = closed;
  for (int it = 0; it < 50; ++it) {
    const double mid = 0.5 * (lo + hi);
    (overlaps(rest_surfaces(f, fr, mid), object, pose) ? hi : lo) = mid;
  }
  const double step = 5e-4 / std::abs(linkage::transmission_jacobian(g, lo).aperture_per_crank * 0.5);
  FingerContact prev = press_right(f, fr, object, pose, lo, nullptr);
  double prev_crank = lo;
  while (prev_crank > closed) {
    const double next_crank = std::max(closed, prev_crank - step);
    FingerContact next = press_right(f, fr, object, pose, next_crank, fr ? &prev.finray : nullptr);
    if (next.squeeze >= available(next_crank)) {
      double a = prev_crank, b = next_crank;
      FingerContact a_state = prev, b_state = std::move(next);
      for (int it = 0; it < 30 && std::abs(a - b) > 1e-9; ++it) {
        const double mid = 0.5 * (a + b);
        FingerContact s = press_right(f, fr, object, pose, mid, fr ? &a_state.finray : nullptr);
        if (s.squeeze < available(mid)) {
          a = mid;
          a_state = std::move(s);
        } else {
          b = mid;
          b_state = std::move(s);
        }
      }
      r.crank = b;
      r.state = std::move(b_state);
      return r;
    }
    prev = std::move(next);
    prev_crank = next_crank;
  }
  r.crank = closed;
  r.state = std::move(prev);
  return r;
}

}  // namespace

Pose2 grasp_pose(const GripperFixture& f, const contact::ObjectShape2D& object, const GraspOffset& offset) {
  const FingerPlacement open = place_finger(f, f.geometry.crank_angle_open);
  Pose2 p;
  p.angle = object.canonical_orientation + offset.dtheta;
  p.translation = Vec2(offset.dx, open.tip.y() + f.grasp_height + offset.dy);
  return p;
}

namespace {

struct Attempt {
  GraspOutcome outcome;
  bool wrapped = false;
  bool on_pad = false;
};

Attempt attempt_grasp(const GripperFixture& f, const elastics::FinRayFinger* fr, const contact::ObjectShape2D& object,
                      const Pose2& pose, double gravity) {
  Attempt a;
  GraspOutcome& out = a.outcome;
  out.object_pose = pose;
  const contact::ObjectShape2D mirrored = mirror_object(object);
  const double open = f.geometry.crank_angle_open;
  if (overlaps(rest_surfaces(f, fr, open), object, pose) ||
      overlaps(rest_surfaces(f, fr, open), mirrored, mirror_pose(pose))) {
    out.verdict.success = false;
    out.verdict.reason = contact::GraspFailure::no_closure;
    out.verdict.detail = "object overlaps a finger at the open pose";
    return a;
  }
  // The first finger to touch pushes the object until the other one
  // touches too: centre it between the two touch points.
  Pose2 placed = pose;
  double shift_right = 0.0, shift_left = 0.0;
  if (touch_shift(f, fr, object, pose, shift_right) && touch_shift(f, fr, mirrored, mirror_pose(pose), shift_left)) {
    placed.translation.x() += 0.5 * (shift_right - shift_left);
  }
  out.object_pose = placed;
  const FingerClose right = close_right(f, fr, object, placed);
  const FingerClose left = close_right(f, fr, mirrored, mirror_pose(placed));
  a.wrapped = left.state.wrapped || right.state.wrapped;
  a.on_pad = left.state.on_pad || right.state.on_pad;
  out.crank_angles = {left.crank, right.crank};
  out.squeeze = {left.state.squeeze, right.state.squeeze};
  for (auto c : left.state.contacts) {
    c.position = mirror(c.position);
    c.normal = mirror(c.normal);
    c.finger = 0;
    out.contacts.push_back(c);
  }
  for (const auto& c : right.state.contacts) out.contacts.push_back(c);
  const double budget[2] = {left.state.normal_sum, right.state.normal_sum};
  out.verdict = contact::check_grasp(out.contacts, object, placed.apply(object.center_of_mass), gravity, budget);
  return a;
}

// Turn that brings an object edge touched by a finger parallel to the
// closing symmetry axis; the smallest such turn. Zero when none qualifies.
double flush_turn(const contact::ObjectShape2D& object, const GraspOutcome& g) {
  const double tol = 1e-4;
  double best = 0.0;
  bool found = false;
  const std::size_t n = object.vertices.size();
  for (const auto& c : g.contacts) {
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 p = g.object_pose.apply(object.vertices[i]);
      const Vec2 q = g.object_pose.apply(object.vertices[(i + 1) % n]);
      const Vec2 e = q - p;
      const double t = std::clamp((c.position - p).dot(e) / e.squaredNorm(), 0.0, 1.0);
      if ((p + t * e - c.position).norm() > tol + c.penetration) continue;
      const double turn = std::remainder(0.5 * kPi - std::atan2(e.y(), e.x()), kPi);
      if (!found || std::abs(turn) < std::abs(best)) best = turn;
      found = true;
    }
  }
  return best;
}

}  // namespace

GraspOutcome grasp_at_pose(const GripperFixture& f, const contact::ObjectShape2D& object, const Pose2& pose,
                           double gravity) {
  object.validate();
  GraspOutcome out;
  out.object_pose = pose;
  try {
    const elastics::FinRayFinger finger = f.has_finray() ? elastics::build_finray(f.finray) : elastics::FinRayFinger{};
    const elastics::FinRayFinger* fr = f.has_finray() ? &finger : nullptr;
    Attempt a = attempt_grasp(f, fr, object, pose, gravity);
    // A squeezed polygon pivots on a rigid pad until a touched face lines
    // up with the closing direction. A corner pressed into a Fin-Ray face
    // holds the orientation.
    const bool free_to_turn = a.on_pad && !a.wrapped;
    if (free_to_turn && object.kind == contact::ShapeKind::convex_polygon) {
      const double turn = flush_turn(object, a.outcome);
      if (std::abs(turn) > 1e-6 && std::abs(turn) <= 0.25 * kPi + 1e-9) {
        Pose2 turned = a.outcome.object_pose;
        turned.angle += turn;
        Attempt b = attempt_grasp(f, fr, object, turned, gravity);
        if (b.outcome.verdict.reason != contact::GraspFailure::no_closure) a = std::move(b);
      }
    }
    out = std::move(a.outcome);
  } catch (const Error& e) {
    out.verdict.success = false;
    out.verdict.reason = contact::GraspFailure::no_closure;
    out.verdict.detail = std::string("solver error: ") + e.what();
  }
  return out;
}

GraspOutcome grasp_object(const GripperFixture& f, const contact::ObjectShape2D& object, const GraspOffset& offset,
                          double gravity) {
  if (std::abs(offset.dx) > 0.1 || std::abs(offset.dy) > 0.1 || std::abs(offset.dtheta) > 0.5 * kPi + 1e-12) {
    throw InvalidArgument("grasp offset out of range");
  }
  return grasp_at_pose(f, object, grasp_pose(f, object, offset), gravity);
}

}  // namespace bariflex::sim
