#include "actuation.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace bariflex::actuation {

double MotorModel::encoder_resolution() const { return 2.0 * kPi / std::ldexp(1.0, encoder_bits); }

void MotorModel::validate() const {
  if (!(rotor_inertia > 0 && torque_limit > 0 && speed_limit > 0 && coulomb_friction >= 0 && viscous_friction >= 0 &&
        accel_limit > 0 && encoder_bits > 0 && encoder_bits <= 30 && gear_ratio > 0 && kp >= 0 && kd >= 0)) {
    throw InvalidArgument("motor parameters must be positive");
  }
}

double quantize(const MotorModel& m, double angle) {
  const double res = m.encoder_resolution();
  return std::round(angle / res) * res;
}

MotorState make_state(const MotorModel& m, double angle) { return {angle, 0.0, quantize(m, angle)}; }

MotorState step_motor(const MotorModel& m, const MotorState& s, double commanded_torque, double external_torque,
                      double dt) {
  dt = std::clamp(dt, 1e-9, 1e-2);
  const double tau = std::clamp(commanded_torque, -m.torque_limit, m.torque_limit);
  const double net = tau + external_torque;
  MotorState out = s;
  if (s.velocity == 0.0 && std::abs(net) <= m.coulomb_friction) {
    out.encoder_reading = quantize(m, out.angle);
    return out;
  }
  const double direction = s.velocity != 0.0 ? std::copysign(1.0, s.velocity) : std::copysign(1.0, net);
  const double friction = m.coulomb_friction * direction + m.viscous_friction * s.velocity;
  const double accel = std::clamp((net - friction) / m.rotor_inertia, -m.accel_limit, m.accel_limit);
  double v = s.velocity + accel * dt;
  // Friction can stop the rotor but never reverse it within a step.
  if (v * direction < 0.0) v = 0.0;
  v = std::clamp(v, -m.speed_limit, m.speed_limit);
  out.velocity = v;
  out.angle = s.angle + v * dt;
  out.encoder_reading = quantize(m, out.angle);
  return out;
}

double backdrive_threshold(const MotorModel& m, double tip_per_crank) {
  if (!(std::abs(tip_per_crank) > 1e-9)) throw SingularTransmission("fingertip does not move with the crank");
  return m.coulomb_friction * m.gear_ratio / std::abs(tip_per_crank);
}

double backdrive_threshold(const MotorModel& m, const linkage::LinkageGeometry& g, double crank_angle) {
  return backdrive_threshold(m, 0.5 * linkage::transmission_jacobian(g, crank_angle).aperture_per_crank);
}

double closing_profile(const MotorModel& m, double motor_travel) {
  TrapezoidProfile p{0.0, std::abs(motor_travel), m.speed_limit, m.accel_limit};
  return p.duration();
}

double solve_accel_limit(double travel, double duration, double speed) {
  if (!(travel > 0 && duration > 0 && speed > 0)) throw InvalidArgument("travel, duration and speed must be positive");
  // Trapezoid: t = s/v + v/a. Valid when the cruise phase exists (v^2/a <= s).
  if (duration > travel / speed) {
    const double a = speed / (duration - travel / speed);
    if (speed * speed / a <= travel) return a;
  }
  // Triangle: t = 2 sqrt(s/a), peak speed sqrt(a s) must stay under the limit.
  const double a = 4.0 * travel / (duration * duration);
  if (std::sqrt(a * travel) > speed * (1.0 + 1e-12)) {
    throw InvalidArgument("duration is shorter than the speed limit allows");
  }
  return a;
}

double TrapezoidProfile::duration() const {
  const double s = std::abs(travel);
  if (s == 0.0) return 0.0;
  if (s <= speed * speed / accel) return 2.0 * std::sqrt(s / accel);
  return s / speed + speed / accel;
}

TrapezoidProfile::Sample TrapezoidProfile::at(double t) const {
  const double s = std::abs(travel);
  const double sign = travel < 0 ? -1.0 : 1.0;
  const double total = duration();
  if (s == 0.0 || t >= total) return {start + travel, 0.0, 0.0};
  if (t <= 0.0) return {start, 0.0, 0.0};
  const double peak = std::min(speed, std::sqrt(accel * s));
  const double t_acc = peak / accel;
  const double t_dec = total - t_acc;
  double pos, vel, acc;
  if (t < t_acc) {
    pos = 0.5 * accel * t * t;
    vel = accel * t;
    acc = accel;
  } else if (t < t_dec) {
    pos = 0.5 * accel * t_acc * t_acc + peak * (t - t_acc);
    vel = peak;
    acc = 0.0;
  } else {
    const double r = total - t;
    pos = s - 0.5 * accel * r * r;
    vel = accel * r;
    acc = -accel;
  }
  return {start + sign * pos, sign * vel, sign * acc};
}

TrapezoidProfile make_profile(const MotorModel& m, double start, double target) {
  return {start, target - start, m.speed_limit, m.accel_limit};
}

double pd_torque(const MotorModel& m, const MotorState& s, double target, double target_velocity, double feedforward) {
  const double tau = m.kp * (target - s.encoder_reading) + m.kd * (target_velocity - s.velocity) + feedforward;
  return std::clamp(tau, -m.torque_limit, m.torque_limit);
}

MotorModel motor_from_config(const KeyValueFile& kv) {
  MotorModel m;
  m.rotor_inertia = kv.number("inertia");
  m.torque_limit = kv.number("torque_limit");
  m.speed_limit = deg2rad(kv.number("speed_limit_dps"));
  m.coulomb_friction = kv.number("coulomb");
  m.viscous_friction = kv.number("viscous");
  m.accel_limit = kv.number("accel_limit");
  m.encoder_bits = static_cast<int>(kv.integer("encoder_bits"));
  m.gear_ratio = kv.number("gear_ratio");
  m.kp = kv.number("kp");
  m.kd = kv.number("kd");
  m.validate();
  return m;
}

KeyValueFile motor_to_config(const MotorModel& m) {
  KeyValueFile kv;
  kv.set("inertia", m.rotor_inertia);
  kv.set("torque_limit", m.torque_limit);
  kv.set("speed_limit_dps", rad2deg(m.speed_limit));
  kv.set("coulomb", m.coulomb_friction);
  kv.set("viscous", m.viscous_friction);
  kv.set("accel_limit", m.accel_limit);
  kv.set("encoder_bits", static_cast<double>(m.encoder_bits));
  kv.set("gear_ratio", m.gear_ratio);
  kv.set("kp", m.kp);
  kv.set("kd", m.kd);
  return kv;
}

}  // namespace bariflex::actuation
