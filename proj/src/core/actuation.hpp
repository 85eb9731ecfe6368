#pragma once

#include "config.hpp"
#include "linkage.hpp"

namespace bariflex::actuation {

/// Direct-drive motor on the pinion; `gear_ratio` is motor turns per crank turn.
struct MotorModel {
  double rotor_inertia = 1e-4;       // reflected [kg m^2]
  double torque_limit = 0.6;         // [N m]
  double speed_limit = 1440.0 * kPi / 180.0;  // [rad/s], motor side
  double coulomb_friction = 0.01;    // [N m]
  double viscous_friction = 1e-3;    // [N m s/rad]
  double accel_limit = 287.5831993061967;  // [rad/s^2], 133.4 deg of motor travel in 0.18 s
  int encoder_bits = 14;
  double gear_ratio = 37.0 / 24.0;
  double kp = 5.0;                   // PD position gains on the encoder [N m/rad]
  double kd = 0.05;                  // [N m s/rad]

  double encoder_resolution() const;
  void validate() const;
};

struct MotorState {
  double angle = 0.0;            // true motor angle [rad]
  double velocity = 0.0;         // [rad/s]
  double encoder_reading = 0.0;  // quantized angle [rad]
};

double quantize(const MotorModel& m, double angle);
MotorState make_state(const MotorModel& m, double angle);

/// One semi-implicit Euler step with stick-slip Coulomb friction.
MotorState step_motor(const MotorModel& m, const MotorState& s, double commanded_torque, double external_torque,
                      double dt);

/// Smallest fingertip force that overcomes static friction, for a finger
/// whose fingertip moves `tip_per_crank` metres per radian of crank.
double backdrive_threshold(const MotorModel& m, double tip_per_crank);
double backdrive_threshold(const MotorModel& m, const linkage::LinkageGeometry& g, double crank_angle);

/// Minimum-time move under the speed and acceleration limits.
double closing_profile(const MotorModel& m, double motor_travel);

/// Acceleration limit for which `travel` takes exactly `duration` at `speed`.
double solve_accel_limit(double travel, double duration, double speed);

/// Trapezoidal (or triangular) reference from `start` to `start + travel`.
struct TrapezoidProfile {
  double start = 0.0;
  double travel = 0.0;  // signed
  double speed = 0.0;
  double accel = 0.0;

  double duration() const;
  struct Sample {
    double position;
    double velocity;
    double acceleration;
  };
  Sample at(double t) const;
};

TrapezoidProfile make_profile(const MotorModel& m, double start, double target);

/// PD law with acceleration feed-forward, saturated at the torque limit.
double pd_torque(const MotorModel& m, const MotorState& s, double target, double target_velocity,
                 double feedforward = 0.0);

MotorModel motor_from_config(const KeyValueFile& kv);
KeyValueFile motor_to_config(const MotorModel& m);

}  // namespace bariflex::actuation
