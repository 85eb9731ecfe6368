#include <doctest.h>

#include <cmath>

#include "actuation.hpp"
#include "errors.hpp"
#include "fixture.hpp"

using namespace bariflex;
using namespace bariflex::actuation;

namespace {

// Closed-form duration of a rest-to-rest move with speed and acceleration caps.
double trapezoid_time(double s, double v, double a) {
  if (s <= 0) return 0.0;
  if (v * v / a <= s) return s / v + v / a;
  return 2.0 * std::sqrt(s / a);
}

double run_torque(const MotorModel& m, double torque, double duration, double dt) {
  MotorState s = make_state(m, 0.0);
  const int n = static_cast<int>(std::lround(duration / dt));
  for (int i = 0; i < n; ++i) s = step_motor(m, s, torque, 0.0, dt);
  return s.angle;
}

}  // namespace

TEST_SUITE("actuation") {

TEST_CASE("encoder quantization") {
  const MotorModel m;
  CHECK(m.encoder_resolution() == doctest::Approx(2.0 * kPi / 16384.0).epsilon(1e-15));
  CHECK(quantize(m, deg2rad(0.010)) == 0.0);
  CHECK(rad2deg(quantize(m, deg2rad(0.020))) == doctest::Approx(360.0 / 16384.0));
  for (double a = -1.0; a < 1.0; a += 0.0137) {
    const double q = quantize(m, a);
    CHECK(std::abs(q - a) <= 0.5 * m.encoder_resolution() + 1e-15);
    CHECK(std::abs(std::remainder(q, m.encoder_resolution())) < 1e-12);
  }
  CHECK(make_state(m, 0.3).encoder_reading == quantize(m, 0.3));
}

TEST_CASE("static friction holds a small load") {
  const MotorModel m;
  const auto s = step_motor(m, make_state(m, 0.0), 0.0, 0.005, 1e-3);
  CHECK(s.angle == 0.0);
  CHECK(s.velocity == 0.0);
}

TEST_CASE("frictionless motor obeys Newton") {
  MotorModel m;
  m.coulomb_friction = 0.0;
  m.viscous_friction = 0.0;
  const double tau = 0.02;
  const double dt = 1e-3;
  const auto s = step_motor(m, make_state(m, 0.0), 0.0, tau, dt);
  CHECK(s.velocity == doctest::Approx(tau * dt / m.rotor_inertia).epsilon(1e-12));
}

TEST_CASE("velocity never exceeds the speed limit") {
  const MotorModel m;
  MotorState s = make_state(m, 0.0);
  for (int i = 0; i < 2000; ++i) {
    s = step_motor(m, s, m.torque_limit, 0.5, 1e-3);
    CHECK(std::abs(s.velocity) <= m.speed_limit + 1e-12);
  }
}

TEST_CASE("halving the time step changes little") {
  const MotorModel m;
  // Position move under the PD law, sampled after it settles.
  auto maneuver = [&](double dt) {
    const auto p = make_profile(m, 0.0, 1.5);
    MotorState s = make_state(m, 0.0);
    const int n = static_cast<int>(std::lround(0.4 / dt));
    for (int i = 0; i < n; ++i) {
      const auto ref = p.at(i * dt);
      s = step_motor(m, s, pd_torque(m, s, ref.position, ref.velocity, m.rotor_inertia * ref.acceleration), 0.0, dt);
    }
    return s.angle;
  };
  const double coarse = maneuver(1e-3);
  CHECK(coarse == doctest::Approx(1.5).epsilon(0.01));
  // the encoder and the friction deadband limit a settled move to about one count
  CHECK(std::abs(coarse - maneuver(5e-4)) < m.encoder_resolution());
  CHECK(maneuver(1e-3) == coarse);

  // Slow creep under a load just past breakaway.
  auto creep = [&](double dt) {
    MotorState s = make_state(m, 0.0);
    const int n = static_cast<int>(std::lround(0.2 / dt));
    for (int i = 0; i < n; ++i) s = step_motor(m, s, 0.0, 1.01 * m.coulomb_friction, dt);
    return s.angle;
  };
  CHECK(creep(1e-3) > 0.0);
  CHECK(std::abs(creep(1e-3) - creep(5e-4)) < 1e-4);
}

TEST_CASE("open-loop torque converges at first order") {
  const MotorModel m;
  const double ref = run_torque(m, 0.05, 0.05, 1.25e-5);
  const double e1 = std::abs(run_torque(m, 0.05, 0.05, 1e-4) - ref);
  const double e2 = std::abs(run_torque(m, 0.05, 0.05, 5e-5) - ref);
  CHECK(e1 > 0.0);
  // with the reference itself off by e/8, first order gives (8 - 1) / (4 - 1)
  CHECK(e1 / e2 == doctest::Approx(7.0 / 3.0).epsilon(0.05));
}

TEST_CASE("backdrive threshold") {
  const auto bari = sim::builtin_fixture("bariflex");
  const auto& g = bari.geometry;
  const double mid = 0.5 * (g.crank_angle_open + g.crank_angle_closed);
  // tau_friction = F * d(tip)/d(motor)
  const double h = 1e-6;
  const double tip_per_motor = 0.25 * std::abs(linkage::aperture(g, linkage::crank_from_motor(g, 1.0 + h)) -
                                               linkage::aperture(g, linkage::crank_from_motor(g, 1.0 - h))) / h;
  const double phi = linkage::motor_from_crank(g, mid);
  const double tpm_mid = 0.25 * std::abs(linkage::aperture(g, linkage::crank_from_motor(g, phi + h)) -
                                         linkage::aperture(g, linkage::crank_from_motor(g, phi - h))) / h;
  CHECK(tip_per_motor > 0.0);
  const double threshold = backdrive_threshold(bari.motor, g, mid);
  CHECK(threshold == doctest::Approx(bari.motor.coulomb_friction / tpm_mid).epsilon(1e-6));
  CHECK(threshold < 1.0);

  auto stiff = bari.motor;
  stiff.coulomb_friction *= 100.0;
  CHECK(backdrive_threshold(stiff, g, mid) > 20.0);

  auto free = bari.motor;
  free.coulomb_friction = 0.0;
  CHECK(backdrive_threshold(free, g, mid) == 0.0);
}

TEST_CASE("closing time") {
  const auto bari = sim::builtin_fixture("bariflex");
  const auto& m = bari.motor;
  const double travel = bari.geometry.range_of_motion() * bari.geometry.gear_ratio;
  const double t = closing_profile(m, travel);
  CHECK(t == doctest::Approx(0.180).epsilon(0.005 / 0.180));
  CHECK(t == doctest::Approx(trapezoid_time(travel, m.speed_limit, m.accel_limit)).epsilon(1e-12));
  CHECK(closing_profile(m, 0.0) == 0.0);
  CHECK(closing_profile(m, 1e-9) < 1e-3);
  auto slow = m;
  slow.speed_limit *= 0.5;
  CHECK(closing_profile(slow, travel) > t);
}

TEST_CASE("acceleration limit from a target duration") {
  const double travel = deg2rad(86.5) * 37.0 / 24.0;
  CHECK(rad2deg(travel) == doctest::Approx(133.4).epsilon(0.05 / 133.4));
  const double v = deg2rad(1440.0);
  const double a = solve_accel_limit(travel, 0.18, v);
  CHECK(trapezoid_time(travel, v, a) == doctest::Approx(0.18).epsilon(1e-12));
  CHECK(MotorModel{}.accel_limit == doctest::Approx(a).epsilon(1e-12));
  // triangular branch
  const double at = solve_accel_limit(0.1, 0.5, v);
  CHECK(trapezoid_time(0.1, v, at) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(solve_accel_limit(travel, 0.01, v), InvalidArgument);
  CHECK_THROWS_AS(solve_accel_limit(0.0, 0.18, v), InvalidArgument);
}

TEST_CASE("trapezoid reference") {
  const MotorModel m;
  for (double target : {2.3, -0.4, 0.05}) {
    const auto p = make_profile(m, 0.2, target);
    const double T = p.duration();
    CHECK(T == doctest::Approx(trapezoid_time(std::abs(target - 0.2), m.speed_limit, m.accel_limit)).epsilon(1e-12));
    CHECK(p.at(0.0).position == doctest::Approx(0.2));
    CHECK(p.at(T).position == doctest::Approx(target).epsilon(1e-12));
    CHECK(p.at(T + 1.0).position == doctest::Approx(target).epsilon(1e-12));
    CHECK(p.at(T).velocity == doctest::Approx(0.0).epsilon(1e-9));
    double prev = p.at(0.0).position;
    for (int i = 1; i <= 200; ++i) {
      const auto s = p.at(T * i / 200.0);
      CHECK(std::abs(s.velocity) <= m.speed_limit + 1e-9);
      CHECK(std::abs(s.position - prev) <= m.speed_limit * T / 200.0 + 1e-12);
      prev = s.position;
    }
  }
}

TEST_CASE("PD torque saturates") {
  const MotorModel m;
  const auto s = make_state(m, 0.0);
  CHECK(pd_torque(m, s, 100.0, 0.0) == m.torque_limit);
  CHECK(pd_torque(m, s, -100.0, 0.0) == -m.torque_limit);
  CHECK(pd_torque(m, s, 0.0, 0.0) == 0.0);
}

TEST_CASE("motor config round-trips") {
  MotorModel m;
  m.coulomb_friction = 0.0123;
  m.encoder_bits = 12;
  const auto back = motor_from_config(KeyValueFile::parse(motor_to_config(m).dump()));
  CHECK(back.coulomb_friction == m.coulomb_friction);
  CHECK(back.encoder_bits == 12);
  CHECK(back.accel_limit == m.accel_limit);
  CHECK(back.kp == m.kp);
  MotorModel bad;
  bad.rotor_inertia = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

}
